#pragma once

// Flat key=value run configuration. Every recognised key has a default and a
// one-line description; unknown keys are rejected so typos fail loudly.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "cocob/error.hpp"
#include "cocob/io.hpp"

namespace cocob {

struct ConfigKey {
    std::string_view key;
    std::string_view default_value;
    std::string_view description;
};

// clang-format off
inline constexpr ConfigKey config_keys[] = {
    {"seed",             "1",             "master seed; every random stream derives from it"},
    {"out",              "out",           "output directory"},
    {"policies",         "cocob,linucb",  "comma list from cocob, linucb, dynucb, cab, random, oracle (synth only)"},
    {"repetitions",      "5",             "seeded repetitions per synth run or sweep cell (>= 1)"},
    {"threads",          "0",             "worker threads for repetitions / sweep cells (0 = hardware)"},
    {"T",                "5000",          "rounds per synthetic episode (>= 0)"},
    {"K",                "10",            "recommendation list length (1 <= K <= J)"},
    {"J",                "50",            "candidate set size"},
    {"e",                "0.1",           "exploration coefficient (>= 0)"},
    {"gamma",            "0.8",           "CoCoB similarity threshold in [0, 1]"},
    {"alpha",            "15",            "CoCoB Beta prior successes (> 0)"},
    {"beta",             "15",            "CoCoB Beta prior failures (> 0)"},
    {"n_clusters",       "10",            "DynUCB cluster count (1 <= n_clusters <= users)"},
    {"m",                "40",            "synthetic users"},
    {"env_clusters",     "4",             "synthetic preference clusters (<= m)"},
    {"d",                "8",             "synthetic feature dimension"},
    {"pool",             "1000",          "synthetic item pool size (>= J)"},
    {"cluster_mode",     "hard",          "hard (shared theta) or soft (within angular radius rho)"},
    {"rho",              "0.2",           "soft-cluster angular radius in radians, [0, pi/2]"},
    {"noise",            "bernoulli",     "reward model: bernoulli or threshold"},
    {"log",              "synthetic",     "replay source: 'synthetic' or a directory written by prep"},
    {"log_users",        "1000",          "synthetic log users"},
    {"log_pool",         "2000",          "synthetic log item pool"},
    {"log_d",            "8",             "synthetic log feature dimension"},
    {"log_clusters",     "10",            "synthetic log preference clusters"},
    {"log_min_len",      "10",            "synthetic log minimum events per user"},
    {"log_max_len",      "20",            "synthetic log maximum events per user"},
    {"relevant",         "full",          "S_u definition for replay: full or holdout"},
    {"holdout_fraction", "0.2",           "fraction of each user's latest events used when relevant=holdout"},
    {"axis",             "K",             "sweep axis: K, gamma, e or n_clusters"},
    {"values",           "1,5,10",        "comma list of sweep values"},
    {"policy",           "cocob",         "policy evaluated by sweep"},
    {"input",            "",              "prep: raw interaction log path"},
    {"dataset",          "generic",       "prep: generic, ijcai15, retailrocket or yoochoose"},
    {"prep_d",           "0",             "prep: factor dimension (0 = dataset default; generic requires it)"},
    {"min_len",          "10",            "prep: minimum events per kept user"},
    {"max_len",          "20",            "prep: maximum events per kept user"},
    {"n_users",          "1000",          "prep: users sampled after length filtering"},
    {"lambda",           "0.1",           "prep: ALS ridge regularization (> 0)"},
    {"iterations",       "30",            "prep: ALS alternations"},
};
// clang-format on

class RunConfig {
public:
    RunConfig() {
        for (const ConfigKey& k : config_keys) values_.emplace(k.key, k.default_value);
    }

    /// Loads `key = value` lines; '#' starts a comment.
    void load_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open config '" + path.string() + "'");
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            std::string_view l = io::trim_cr(line);
            if (const auto hash = l.find('#'); hash != std::string_view::npos) l = l.substr(0, hash);
            l = strip(l);
            if (l.empty()) continue;
            const auto eq = l.find('=');
            if (eq == std::string_view::npos) throw parse_error("config: expected key = value", lineno);
            try {
                set(strip(l.substr(0, eq)), strip(l.substr(eq + 1)));
            } catch (const invalid_input& e) {
                throw parse_error(std::string("config: ") + e.what(), lineno);
            }
        }
    }

    /// Applies a `key=value` override.
    void apply_override(std::string_view kv) {
        const auto eq = kv.find('=');
        if (eq == std::string_view::npos) throw invalid_input("override '" + std::string(kv) + "' is not key=value");
        set(strip(kv.substr(0, eq)), strip(kv.substr(eq + 1)));
    }

    void set(std::string_view key, std::string_view value) {
        const auto it = values_.find(std::string(key));
        if (it == values_.end()) throw invalid_input("unknown config key '" + std::string(key) + "'");
        it->second = std::string(value);
    }

    const std::string& str(std::string_view key) const {
        const auto it = values_.find(std::string(key));
        if (it == values_.end()) throw invalid_input("unknown config key '" + std::string(key) + "'");
        return it->second;
    }

    std::uint64_t u64(std::string_view key) const { return checked(key, [&] { return io::parse_int<std::uint64_t>(str(key)); }); }
    std::size_t size(std::string_view key) const { return checked(key, [&] { return io::parse_int<std::size_t>(str(key)); }); }
    double real(std::string_view key) const { return checked(key, [&] { return io::parse_double(str(key)); }); }

    std::vector<std::string> list(std::string_view key) const {
        std::vector<std::string> out;
        for (std::string_view part : io::split(str(key)))
            if (!strip(part).empty()) out.emplace_back(strip(part));
        return out;
    }

    const std::map<std::string, std::string>& values() const noexcept { return values_; }

private:
    static std::string_view strip(std::string_view s) {
        while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
        while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
        return s;
    }

    template <class F>
    std::invoke_result_t<F> checked(std::string_view key, F&& f) const {
        try {
            return f();
        } catch (const parse_error&) {
            throw invalid_input("config key '" + std::string(key) + "' has invalid value '" + str(key) + "'");
        }
    }

    std::map<std::string, std::string> values_;
};

}  // namespace cocob
