#pragma once

// Experiment runners behind the cocob_bench CLI: synthetic regret runs,
// replay evaluations, parameter sweeps, the ingestion pipeline and timing.
// All CSV outputs are pure functions of the configuration, so reruns with the
// same config and seed are byte-identical (timing.csv excepted).

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "cocob/baselines.hpp"
#include "cocob/cocob.hpp"
#include "cocob/config.hpp"
#include "cocob/domain.hpp"
#include "cocob/ingest.hpp"
#include "cocob/io.hpp"
#include "cocob/replay.hpp"
#include "cocob/rng.hpp"
#include "cocob/synthetic.hpp"

#ifndef COCOB_VERSION
#define COCOB_VERSION "unknown"
#endif

namespace cocob {

inline constexpr std::string_view version = COCOB_VERSION;

/// Runs fn(0..n-1) on up to `threads` workers (0 = hardware). Results must be
/// written to per-index slots; the first exception is rethrown.
template <class F>
void parallel_for(std::size_t n, std::size_t threads, F&& fn) {
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = std::min(threads, n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < threads; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

struct SampleStats {
    double min = 0.0, max = 0.0, mean = 0.0, std = 0.0;
};

/// Sample statistics; std uses the n-1 denominator and is 0 for one value.
inline SampleStats sample_stats(std::span<const double> v) {
    if (v.empty()) throw invalid_input("sample_stats: no values");
    SampleStats s;
    s.min = *std::min_element(v.begin(), v.end());
    s.max = *std::max_element(v.begin(), v.end());
    s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() > 1) {
        double ss = 0.0;
        for (double x : v) ss += (x - s.mean) * (x - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
    }
    return s;
}

struct PolicyParams {
    std::size_t k = 10;
    double e = 0.1;
    double gamma = 0.8;
    double alpha0 = 15.0;
    double beta0 = 15.0;
    std::size_t n_clusters = 10;

    static PolicyParams from(const RunConfig& cfg) {
        return {cfg.size("K"), cfg.real("e"), cfg.real("gamma"), cfg.real("alpha"), cfg.real("beta"),
                cfg.size("n_clusters")};
    }
};

inline const std::vector<std::string>& known_policies() {
    static const std::vector<std::string> names{"cocob", "linucb", "dynucb", "cab", "random", "oracle"};
    return names;
}

/// `env` is required for "oracle" only.
inline std::unique_ptr<Policy> make_policy(std::string_view name, const PolicyParams& p, std::size_t m, std::size_t d,
                                           const Environment* env = nullptr) {
    const LinearBanditConfig lin{p.e, p.k};
    if (name == "cocob") return std::make_unique<Cocob>(m, d, CocobConfig{p.gamma, p.alpha0, p.beta0, p.e, p.k});
    if (name == "linucb") return std::make_unique<LinUcb>(m, d, lin);
    if (name == "dynucb") return std::make_unique<DynUcb>(m, d, std::min(p.n_clusters, m), lin);
    if (name == "cab") return std::make_unique<Cab>(m, d, lin);
    if (name == "random") return std::make_unique<RandomPolicy>(p.k);
    if (name == "oracle") {
        if (!env) throw invalid_input("policy 'oracle' needs a synthetic environment");
        return std::make_unique<OraclePolicy>(*env, p.k);
    }
    throw invalid_input("unknown policy '" + std::string(name) + "'");
}

inline EnvConfig env_config_from(const RunConfig& cfg) {
    EnvConfig c;
    c.m = cfg.size("m");
    c.n_clusters = cfg.size("env_clusters");
    c.d = cfg.size("d");
    c.item_pool_size = cfg.size("pool");
    c.j = cfg.size("J");
    c.k = cfg.size("K");
    c.rounds = cfg.size("T");
    const std::string& mode = cfg.str("cluster_mode");
    if (mode != "hard" && mode != "soft") throw invalid_input("cluster_mode must be hard or soft");
    c.cluster_mode = mode == "hard" ? ClusterMode::hard : ClusterMode::soft;
    c.rho = cfg.real("rho");
    const std::string& noise = cfg.str("noise");
    if (noise != "bernoulli" && noise != "threshold") throw invalid_input("noise must be bernoulli or threshold");
    c.noise = noise == "bernoulli" ? RewardNoise::bernoulli : RewardNoise::threshold;
    c.seed = cfg.u64("seed");
    c.validate();
    return c;
}

// ---------------------------------------------------------------- synth

struct EpisodeTrace {
    std::vector<double> cum_regret;
    std::vector<double> cum_reward;
    std::vector<std::vector<std::size_t>> selections;  // filled when requested
};

/// One episode of `rounds` steps. Users/candidates come from the "rounds"
/// sub-stream, rewards from "rewards", policy randomness from "policy", all
/// keyed by (seed, rep), so every policy faces the same round stream.
inline EpisodeTrace run_episode(Policy& policy, const Environment& env, std::size_t rounds, std::uint64_t seed,
                                std::uint64_t rep, bool keep_selections = false) {
    Rng round_rng = make_rng(seed, "rounds", rep);
    Rng reward_rng = make_rng(seed, "rewards", rep);
    Rng policy_rng = make_rng(seed, "policy", rep);
    EpisodeTrace tr;
    tr.cum_regret.reserve(rounds);
    tr.cum_reward.reserve(rounds);
    double regret = 0.0, reward = 0.0;
    for (std::size_t t = 1; t <= rounds; ++t) {
        const auto [u, c] = draw_round(env, round_rng, t);
        const RecommendationList list = policy.recommend(u, c, policy_rng);
        const RoundFeedback fb = realize_rewards(u, list, c, env, reward_rng);
        policy.update(u, c, list, fb);
        regret += round_regret(u, list, c, env);
        reward += fb.mean_reward;
        tr.cum_regret.push_back(regret);
        tr.cum_reward.push_back(reward);
        if (keep_selections) tr.selections.push_back(list.arm_indices);
    }
    return tr;
}

/// Environment of repetition `rep`.
inline Environment synth_environment(EnvConfig c, std::uint64_t rep) {
    c.seed = derive_seed(c.seed, "environment", rep);
    return environment_from_config(c);
}

struct SynthResult {
    std::string policy;
    std::vector<double> mean_cum_regret, std_cum_regret, mean_cum_reward;
    std::vector<double> final_regret;  // per repetition
    std::vector<double> final_reward;
};

inline std::vector<SynthResult> synth_experiment(const RunConfig& cfg) {
    const EnvConfig ec = env_config_from(cfg);
    const PolicyParams pp = PolicyParams::from(cfg);
    const std::size_t reps = cfg.size("repetitions");
    if (reps < 1) throw invalid_input("repetitions must be >= 1");
    const std::vector<std::string> names = cfg.list("policies");
    for (const auto& n : names)
        if (std::find(known_policies().begin(), known_policies().end(), n) == known_policies().end())
            throw invalid_input("unknown policy '" + n + "'");
    const std::uint64_t seed = cfg.u64("seed");
    const std::size_t rounds = ec.rounds;

    std::vector<EpisodeTrace> traces(names.size() * reps);
    parallel_for(traces.size(), cfg.size("threads"), [&](std::size_t cell) {
        const std::size_t pi = cell / reps, rep = cell % reps;
        const Environment env = synth_environment(ec, rep);
        auto policy = make_policy(names[pi], pp, ec.m, ec.d, &env);
        traces[cell] = run_episode(*policy, env, rounds, seed, rep);
    });

    std::vector<SynthResult> out;
    for (std::size_t pi = 0; pi < names.size(); ++pi) {
        SynthResult r;
        r.policy = names[pi];
        std::vector<double> regrets(reps), rewards(reps);
        for (std::size_t t = 0; t < rounds; ++t) {
            for (std::size_t rep = 0; rep < reps; ++rep) {
                regrets[rep] = traces[pi * reps + rep].cum_regret[t];
                rewards[rep] = traces[pi * reps + rep].cum_reward[t];
            }
            const SampleStats rs = sample_stats(regrets);
            r.mean_cum_regret.push_back(rs.mean);
            r.std_cum_regret.push_back(rs.std);
            r.mean_cum_reward.push_back(sample_stats(rewards).mean);
        }
        for (std::size_t rep = 0; rep < reps; ++rep) {
            const auto& tr = traces[pi * reps + rep];
            r.final_regret.push_back(tr.cum_regret.empty() ? 0.0 : tr.cum_regret.back());
            r.final_reward.push_back(tr.cum_reward.empty() ? 0.0 : tr.cum_reward.back());
        }
        out.push_back(std::move(r));
    }
    return out;
}

inline constexpr const char* synth_csv_header = "t,mean_cum_regret,std_cum_regret,mean_cum_reward";

inline std::string synth_csv(const SynthResult& r) {
    std::ostringstream os;
    os << synth_csv_header << '\n';
    for (std::size_t t = 0; t < r.mean_cum_regret.size(); ++t)
        os << t + 1 << ',' << io::format_double(r.mean_cum_regret[t]) << ',' << io::format_double(r.std_cum_regret[t])
           << ',' << io::format_double(r.mean_cum_reward[t]) << '\n';
    return os.str();
}

struct SynthRow {
    std::size_t t;
    double mean_cum_regret, std_cum_regret, mean_cum_reward;
};

inline std::vector<SynthRow> read_synth_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || io::trim_cr(line) != synth_csv_header) throw parse_error("synth csv: bad header", 1);
    std::vector<SynthRow> rows;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        const auto l = io::trim_cr(line);
        if (l.empty()) continue;
        const auto f = io::split(l);
        if (f.size() != 4) throw parse_error("synth csv: expected 4 fields", lineno);
        rows.push_back({io::parse_int<std::size_t>(f[0], lineno), io::parse_double(f[1], lineno),
                        io::parse_double(f[2], lineno), io::parse_double(f[3], lineno)});
    }
    return rows;
}

/// Files written by a runner, relative to the output directory.
struct RunReport {
    std::vector<std::string> outputs;
};

inline RunReport run_synth(const RunConfig& cfg, const std::filesystem::path& out) {
    RunReport rep;
    const auto results = synth_experiment(cfg);
    std::ostringstream summary;
    summary << "policy,T,mean_final_regret,std_final_regret,mean_final_reward\n";
    for (const SynthResult& r : results) {
        const std::string file = "synth_" + r.policy + ".csv";
        io::write_file_atomic(out / file, synth_csv(r));
        rep.outputs.push_back(file);
        const SampleStats reg = sample_stats(r.final_regret);
        summary << r.policy << ',' << cfg.size("T") << ',' << io::format_double(reg.mean) << ','
                << io::format_double(reg.std) << ',' << io::format_double(sample_stats(r.final_reward).mean) << '\n';
    }
    io::write_file_atomic(out / "synth_summary.csv", summary.str());
    rep.outputs.push_back("synth_summary.csv");
    return rep;
}

// ---------------------------------------------------------------- replay

inline RelevantSet relevant_from(const RunConfig& cfg) {
    const std::string& r = cfg.str("relevant");
    if (r == "full") return RelevantSet::full;
    if (r == "holdout") return RelevantSet::holdout;
    throw invalid_input("relevant must be full or holdout");
}

inline SyntheticLogConfig synthetic_log_config(const RunConfig& cfg) {
    SyntheticLogConfig s;
    s.users = cfg.size("log_users");
    s.pool = cfg.size("log_pool");
    s.d = cfg.size("log_d");
    s.n_clusters = cfg.size("log_clusters");
    s.min_len = cfg.size("log_min_len");
    s.max_len = cfg.size("log_max_len");
    s.seed = derive_seed(cfg.u64("seed"), "log-data");
    return s;
}

/// The synthetic log, or the log + item contexts of a prep output directory.
inline InteractionLog load_replay_log(const RunConfig& cfg) {
    const std::string& src = cfg.str("log");
    if (src == "synthetic") return generate_synthetic_log(synthetic_log_config(cfg), relevant_from(cfg));
    const std::filesystem::path dir(src);
    std::ifstream ctx(dir / "item_contexts.csv");
    if (!ctx) throw std::runtime_error("cannot open '" + (dir / "item_contexts.csv").string() + "'");
    std::ifstream log(dir / "log.csv");
    if (!log) throw std::runtime_error("cannot open '" + (dir / "log.csv").string() + "'");
    return read_interaction_log(log, read_factors(ctx), relevant_from(cfg));
}

inline MetricsSeries replay_policy(std::string_view name, const PolicyParams& pp, const InteractionLog& log,
                                   std::size_t j, std::uint64_t seed) {
    auto policy = make_policy(name, pp, log.users(), log.dim());
    return replay_evaluate(*policy, log, j, pp.k, seed);
}

inline RunReport run_replay(const RunConfig& cfg, const std::filesystem::path& out) {
    RunReport rep;
    const InteractionLog log = load_replay_log(cfg);
    const PolicyParams pp = PolicyParams::from(cfg);
    const std::size_t j = cfg.size("J");
    const std::uint64_t seed = cfg.u64("seed");
    const std::vector<std::string> names = cfg.list("policies");
    for (const auto& n : names)
        if (n == "oracle") throw invalid_input("policy 'oracle' is only available in synth runs");

    std::vector<MetricsSeries> series(names.size());
    parallel_for(names.size(), cfg.size("threads"),
                 [&](std::size_t i) { series[i] = replay_policy(names[i], pp, log, j, seed); });

    std::ostringstream summary;
    summary << "policy,rounds,cum_reward,precision,recall,f1\n";
    for (std::size_t i = 0; i < names.size(); ++i) {
        const MetricsSeries& s = series[i];
        std::ostringstream csv;
        write_metrics_csv(csv, s);
        io::write_file_atomic(out / ("replay_" + names[i] + ".csv"), csv.str());
        rep.outputs.push_back("replay_" + names[i] + ".csv");

        const double prec = s.empty() ? 0.0 : s.mean_precision();
        const double rec = s.empty() ? 0.0 : s.mean_recall();
        const double f1 = s.empty() ? 0.0 : f1_summary(s);
        nlohmann::ordered_json side;
        side["policy"] = names[i];
        side["rounds"] = s.size();
        side["cum_reward"] = s.cum_reward();
        side["precision"] = prec;
        side["recall"] = rec;
        side["f1"] = f1;
        side["J"] = j;
        side["K"] = pp.k;
        side["seed"] = seed;
        side["config"] = cfg.values();
        io::write_file_atomic(out / ("replay_" + names[i] + ".json"), side.dump(2) + "\n");
        rep.outputs.push_back("replay_" + names[i] + ".json");
        summary << names[i] << ',' << s.size() << ',' << io::format_double(s.cum_reward()) << ','
                << io::format_double(prec) << ',' << io::format_double(rec) << ',' << io::format_double(f1) << '\n';
    }
    io::write_file_atomic(out / "replay_summary.csv", summary.str());
    rep.outputs.push_back("replay_summary.csv");
    return rep;
}

// ---------------------------------------------------------------- sweep

struct SweepRow {
    std::string param, value;
    SampleStats f1;
};

/// Replays `policy` for every grid value and repetition; repetition r uses
/// seed derive_seed(seed, "sweep-rep", r) for candidates and policy draws.
inline std::vector<SweepRow> sweep_experiment(const RunConfig& base) {
    const std::string axis = base.str("axis");
    if (axis != "K" && axis != "gamma" && axis != "e" && axis != "n_clusters")
        throw invalid_input("sweep axis must be K, gamma, e or n_clusters");
    const std::vector<std::string> values = base.list("values");
    if (values.empty()) throw invalid_input("sweep needs at least one value");
    const std::size_t reps = base.size("repetitions");
    if (reps < 1) throw invalid_input("repetitions must be >= 1");
    std::vector<PolicyParams> params;
    for (const std::string& v : values) {
        RunConfig c = base;
        c.set(axis, v);
        params.push_back(PolicyParams::from(c));
        CocobConfig{params.back().gamma, params.back().alpha0, params.back().beta0, params.back().e, params.back().k}
            .validate();
    }
    const InteractionLog log = load_replay_log(base);
    const std::size_t j = base.size("J");
    const std::string policy = base.str("policy");
    const std::uint64_t seed = base.u64("seed");

    std::vector<double> f1(values.size() * reps);
    parallel_for(f1.size(), base.size("threads"), [&](std::size_t cell) {
        const std::size_t vi = cell / reps, r = cell % reps;
        f1[cell] = f1_summary(replay_policy(policy, params[vi], log, j, derive_seed(seed, "sweep-rep", r)));
    });
    std::vector<SweepRow> rows;
    for (std::size_t vi = 0; vi < values.size(); ++vi)
        rows.push_back({axis, values[vi], sample_stats(std::span(f1).subspan(vi * reps, reps))});
    return rows;
}

inline RunReport run_sweep(const RunConfig& cfg, const std::filesystem::path& out) {
    RunReport rep;
    const auto rows = sweep_experiment(cfg);
    std::ostringstream os;
    os << "param,value,min,max,mean,std\n";
    for (const SweepRow& r : rows)
        os << r.param << ',' << r.value << ',' << io::format_double(r.f1.min) << ',' << io::format_double(r.f1.max)
           << ',' << io::format_double(r.f1.mean) << ',' << io::format_double(r.f1.std) << '\n';
    const std::string file = "sweep_" + cfg.str("axis") + ".csv";
    io::write_file_atomic(out / file, os.str());
    rep.outputs.push_back(file);
    return rep;
}

// ---------------------------------------------------------------- prep

inline RunReport run_prep(const RunConfig& cfg, const std::filesystem::path& out) {
    RunReport rep;
    const std::filesystem::path input = cfg.str("input");
    if (input.empty()) throw invalid_input("prep needs input=<path>");
    if (!std::filesystem::exists(input)) throw std::runtime_error("input file '" + input.string() + "' does not exist");
    const Dataset dataset = dataset_from_string(cfg.str("dataset"));
    std::size_t d = cfg.size("prep_d");
    if (d == 0) {
        const auto def = default_dimension(dataset);
        if (!def) throw invalid_input("generic datasets need an explicit prep_d");
        d = *def;
    }
    const std::string raw = io::read_file(input);
    std::istringstream raw_stream(raw);
    const std::vector<RawEvent> events = parse_log(raw_stream, dataset);
    const std::uint64_t seed = cfg.u64("seed");
    const IndexedLog filtered =
        filter_users(events, {cfg.size("min_len"), cfg.size("max_len"), cfg.size("n_users"), seed});
    const RatingMatrix ratings = weight_events(filtered);
    FactorConfig fc;
    fc.d = d;
    fc.lambda = cfg.real("lambda");
    fc.iterations = cfg.size("iterations");
    fc.seed = seed;
    const FactorModel fm = factorize(ratings, fc);
    std::vector<std::size_t> flagged;
    const std::vector<Vec> contexts = normalized_contexts(fm.item_factors, &flagged);

    auto emit = [&](const std::string& file, auto&& writer) {
        std::ostringstream os;
        writer(os);
        io::write_file_atomic(out / file, os.str());
        rep.outputs.push_back(file);
    };
    emit("ratings.csv", [&](std::ostream& os) { write_ratings(os, ratings); });
    emit("user_factors.csv", [&](std::ostream& os) { write_factors(os, fm.user_factors); });
    emit("item_factors.csv", [&](std::ostream& os) { write_factors(os, fm.item_factors); });
    emit("item_contexts.csv", [&](std::ostream& os) { write_factors(os, contexts); });
    emit("log.csv", [&](std::ostream& os) { write_indexed_log(os, filtered); });
    emit("users.csv", [&](std::ostream& os) { write_keys(os, filtered.user_keys); });
    emit("items.csv", [&](std::ostream& os) { write_keys(os, filtered.item_keys); });

    nlohmann::ordered_json m;
    m["format"] = "cocob-prep 1";
    m["input"] = input.string();
    m["input_hash"] = io::hex64(io::hash_bytes(raw));
    m["dataset"] = std::string(to_string(dataset));
    m["seed"] = seed;
    m["d"] = d;
    m["lambda"] = fc.lambda;
    m["iterations"] = fc.iterations;
    m["min_len"] = cfg.size("min_len");
    m["max_len"] = cfg.size("max_len");
    m["n_users_requested"] = cfg.size("n_users");
    m["users"] = filtered.user_keys.size();
    m["items"] = filtered.item_keys.size();
    m["events"] = filtered.events.size();
    m["ratings"] = ratings.entries.size();
    m["final_objective"] = fm.objective.back();
    m["rmse"] = observed_rmse(ratings, fm);
    m["zero_item_factors"] = flagged;
    m["warnings"] = fm.warnings;
    io::write_file_atomic(out / "prep_manifest.json", m.dump(2) + "\n");
    rep.outputs.push_back("prep_manifest.json");
    return rep;
}

// ---------------------------------------------------------------- timing

struct TimingRow {
    std::string policy;
    std::size_t rounds = 0;
    double seconds = 0.0;
};

/// Wall time of one episode per policy on the repetition-0 environment.
inline std::vector<TimingRow> timing_experiment(const RunConfig& cfg) {
    const EnvConfig ec = env_config_from(cfg);
    const PolicyParams pp = PolicyParams::from(cfg);
    const Environment env = synth_environment(ec, 0);
    std::vector<TimingRow> rows;
    for (const std::string& name : cfg.list("policies")) {
        auto policy = make_policy(name, pp, ec.m, ec.d, &env);
        const auto start = std::chrono::steady_clock::now();
        run_episode(*policy, env, ec.rounds, cfg.u64("seed"), 0);
        const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
        rows.push_back({name, ec.rounds, dt.count()});
    }
    return rows;
}

inline RunReport run_timing(const RunConfig& cfg, const std::filesystem::path& out) {
    RunReport rep;
    std::ostringstream os;
    os << "policy,rounds,seconds,seconds_per_round\n";
    for (const TimingRow& r : timing_experiment(cfg))
        os << r.policy << ',' << r.rounds << ',' << io::format_double(r.seconds) << ','
           << io::format_double(r.rounds ? r.seconds / static_cast<double>(r.rounds) : 0.0) << '\n';
    io::write_file_atomic(out / "timing.csv", os.str());
    rep.outputs.push_back("timing.csv");
    return rep;
}

// ---------------------------------------------------------------- manifest

inline void write_run_manifest(const std::filesystem::path& out, std::string_view command, const RunConfig& cfg,
                               const RunReport& rep, double wall_seconds) {
    nlohmann::ordered_json m;
    m["command"] = std::string(command);
    m["version"] = std::string(version);
    m["seed"] = cfg.u64("seed");
    m["wall_seconds"] = wall_seconds;
    m["outputs"] = rep.outputs;
    m["config"] = cfg.values();
    io::write_file_atomic(out / "manifest.json", m.dump(2) + "\n");
}

}  // namespace cocob
