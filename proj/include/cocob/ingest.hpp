#pragma once

// Interaction-log ingestion: raw event parsing (generic CSV plus adapters for
// the IJCAI-15, Retailrocket and Yoochoose dumps), user filtering, event
// weighting, and ALS matrix factorization producing item context vectors.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "cocob/error.hpp"
#include "cocob/io.hpp"
#include "cocob/linalg.hpp"
#include "cocob/replay.hpp"
#include "cocob/rng.hpp"

namespace cocob {

enum class EventType { click = 1, favorite = 2, cart = 3, purchase = 4 };

/// Rating weight: click 1, favorite 2, add-to-cart 3, purchase 4.
constexpr int event_weight(EventType t) noexcept { return static_cast<int>(t); }

inline std::optional<EventType> event_type_from_string(std::string_view s) {
    if (s == "click") return EventType::click;
    if (s == "favorite") return EventType::favorite;
    if (s == "cart") return EventType::cart;
    if (s == "purchase") return EventType::purchase;
    return std::nullopt;
}

inline std::string_view to_string(EventType t) {
    switch (t) {
        case EventType::click: return "click";
        case EventType::favorite: return "favorite";
        case EventType::cart: return "cart";
        case EventType::purchase: return "purchase";
    }
    return "click";
}

struct RawEvent {
    std::string user_key;
    std::string item_key;
    EventType type = EventType::click;
    std::int64_t timestamp = 0;

    friend bool operator==(const RawEvent&, const RawEvent&) = default;
};

enum class Dataset { generic, ijcai15, retailrocket, yoochoose };

inline Dataset dataset_from_string(std::string_view s) {
    if (s == "generic") return Dataset::generic;
    if (s == "ijcai15" || s == "IJCAI-15") return Dataset::ijcai15;
    if (s == "retailrocket" || s == "Retailrocket") return Dataset::retailrocket;
    if (s == "yoochoose" || s == "Yoochoose") return Dataset::yoochoose;
    throw invalid_input("unknown dataset '" + std::string(s) + "'");
}

inline std::string_view to_string(Dataset d) {
    switch (d) {
        case Dataset::generic: return "generic";
        case Dataset::ijcai15: return "ijcai15";
        case Dataset::retailrocket: return "retailrocket";
        case Dataset::yoochoose: return "yoochoose";
    }
    return "generic";
}

/// Feature dimension used for each public dataset; generic logs have none.
inline std::optional<std::size_t> default_dimension(Dataset d) {
    switch (d) {
        case Dataset::ijcai15: return 6;
        case Dataset::retailrocket: return 16;
        case Dataset::yoochoose: return 25;
        case Dataset::generic: return std::nullopt;
    }
    return std::nullopt;
}

namespace detail {

// Days since 1970-01-01 for a proleptic Gregorian date.
constexpr std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const auto yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

// "2014-04-07T10:51:09.277Z" -> seconds since epoch (fraction dropped).
inline std::int64_t parse_iso8601(std::string_view s, std::size_t line) {
    if (s.size() < 19 || s[4] != '-' || s[7] != '-' || s[10] != 'T' || s[13] != ':' || s[16] != ':')
        throw parse_error("bad timestamp '" + std::string(s) + "'", line);
    const auto y = io::parse_int<std::int64_t>(s.substr(0, 4), line);
    const auto mo = io::parse_int<unsigned>(s.substr(5, 2), line);
    const auto d = io::parse_int<unsigned>(s.substr(8, 2), line);
    const auto h = io::parse_int<std::int64_t>(s.substr(11, 2), line);
    const auto mi = io::parse_int<std::int64_t>(s.substr(14, 2), line);
    const auto se = io::parse_int<std::int64_t>(s.substr(17, 2), line);
    return days_from_civil(y, mo, d) * 86400 + h * 3600 + mi * 60 + se;
}

inline RawEvent parse_generic(const std::vector<std::string_view>& f, std::size_t line) {
    if (f.size() != 4) throw parse_error("expected 4 fields user_id,item_id,event_type,timestamp", line);
    const auto type = event_type_from_string(f[2]);
    if (!type) throw schema_error("unknown event type '" + std::string(f[2]) + "'", line);
    return {std::string(f[0]), std::string(f[1]), *type, io::parse_int<std::int64_t>(f[3], line)};
}

// user_id,item_id,cat_id,seller_id,brand_id,time_stamp,action_type
// action_type: 0 click, 1 add-to-cart, 2 purchase, 3 favourite.
inline RawEvent parse_ijcai15(const std::vector<std::string_view>& f, std::size_t line) {
    if (f.size() != 7) throw parse_error("expected 7 IJCAI-15 fields", line);
    static constexpr EventType map[] = {EventType::click, EventType::cart, EventType::purchase, EventType::favorite};
    const int action = io::parse_int<int>(f[6], line);
    if (action < 0 || action > 3) throw schema_error("unknown action_type " + std::to_string(action), line);
    return {std::string(f[0]), std::string(f[1]), map[action], io::parse_int<std::int64_t>(f[5], line)};
}

// timestamp,visitorid,event,itemid,transactionid  (view/addtocart/transaction)
inline RawEvent parse_retailrocket(const std::vector<std::string_view>& f, std::size_t line) {
    if (f.size() != 5) throw parse_error("expected 5 Retailrocket fields", line);
    EventType type;
    if (f[2] == "view")
        type = EventType::click;
    else if (f[2] == "addtocart")
        type = EventType::cart;
    else if (f[2] == "transaction")
        type = EventType::purchase;
    else
        throw schema_error("unknown event '" + std::string(f[2]) + "'", line);
    return {std::string(f[1]), std::string(f[3]), type, io::parse_int<std::int64_t>(f[0], line) / 1000};
}

// clicks: session,timestamp,item,category   buys: session,timestamp,item,price,quantity
inline RawEvent parse_yoochoose(const std::vector<std::string_view>& f, std::size_t line) {
    if (f.size() != 4 && f.size() != 5) throw parse_error("expected 4 (click) or 5 (buy) Yoochoose fields", line);
    const EventType type = f.size() == 4 ? EventType::click : EventType::purchase;
    return {std::string(f[0]), std::string(f[2]), type, parse_iso8601(f[1], line)};
}

}  // namespace detail

/// Parses a log stream. Generic, IJCAI-15 and Retailrocket inputs start with a
/// header line; Yoochoose dumps have none.
inline std::vector<RawEvent> parse_log(std::istream& in, Dataset dataset = Dataset::generic) {
    std::vector<RawEvent> out;
    std::string line;
    std::size_t lineno = 0;
    const bool has_header = dataset != Dataset::yoochoose;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string_view l = io::trim_cr(line);
        if (lineno == 1 && has_header) {
            if (dataset == Dataset::generic && l != "user_id,item_id,event_type,timestamp")
                throw parse_error("expected header user_id,item_id,event_type,timestamp", lineno);
            continue;
        }
        if (l.empty()) continue;
        const auto f = io::split(l);
        switch (dataset) {
            case Dataset::generic: out.push_back(detail::parse_generic(f, lineno)); break;
            case Dataset::ijcai15: out.push_back(detail::parse_ijcai15(f, lineno)); break;
            case Dataset::retailrocket: out.push_back(detail::parse_retailrocket(f, lineno)); break;
            case Dataset::yoochoose: out.push_back(detail::parse_yoochoose(f, lineno)); break;
        }
    }
    return out;
}

inline std::vector<RawEvent> parse_log(const std::filesystem::path& path, Dataset dataset = Dataset::generic) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open input '" + path.string() + "'");
    return parse_log(in, dataset);
}

struct IndexedEvent {
    UserId user = 0;
    std::size_t item = 0;
    EventType type = EventType::click;
    std::int64_t timestamp = 0;

    friend bool operator==(const IndexedEvent&, const IndexedEvent&) = default;
};

/// Events with dense user/item indices; `user_keys[i]` is the raw key of index i.
struct IndexedLog {
    std::vector<IndexedEvent> events;
    std::vector<std::string> user_keys;
    std::vector<std::string> item_keys;

    friend bool operator==(const IndexedLog&, const IndexedLog&) = default;
};

struct FilterConfig {
    std::size_t min_len = 10;
    std::size_t max_len = 20;
    std::size_t n_users = 1000;
    std::uint64_t seed = 1;
};

/// Keeps users with min_len..max_len events, samples n_users of them, and
/// reindexes users and items densely in sorted-key order. Event order is kept.
inline IndexedLog filter_users(const std::vector<RawEvent>& events, const FilterConfig& cfg) {
    std::map<std::string, std::size_t> counts;
    for (const RawEvent& ev : events) ++counts[ev.user_key];
    std::vector<std::string> eligible;
    for (const auto& [key, n] : counts)
        if (n >= cfg.min_len && n <= cfg.max_len) eligible.push_back(key);

    Rng rng = make_rng(cfg.seed, "filter");
    std::vector<std::string> chosen;
    for (std::size_t i : sample_without_replacement(eligible.size(), std::min(cfg.n_users, eligible.size()), rng))
        chosen.push_back(eligible[i]);
    std::sort(chosen.begin(), chosen.end());

    std::map<std::string_view, UserId> user_index;
    for (std::size_t i = 0; i < chosen.size(); ++i) user_index.emplace(chosen[i], i);
    std::map<std::string, std::size_t> item_index;
    for (const RawEvent& ev : events)
        if (user_index.count(ev.user_key)) item_index.emplace(ev.item_key, 0);
    IndexedLog out;
    out.user_keys = chosen;
    for (auto& [key, idx] : item_index) {
        idx = out.item_keys.size();
        out.item_keys.push_back(key);
    }
    for (const RawEvent& ev : events) {
        const auto it = user_index.find(ev.user_key);
        if (it == user_index.end()) continue;
        out.events.push_back({it->second, item_index.at(ev.item_key), ev.type, ev.timestamp});
    }
    return out;
}

struct Rating {
    UserId user = 0;
    std::size_t item = 0;
    int rating = 0;

    friend bool operator==(const Rating&, const Rating&) = default;
};

/// One rating per observed (user, item), sorted by (user, item).
struct RatingMatrix {
    std::size_t users = 0;
    std::size_t items = 0;
    std::vector<Rating> entries;

    friend bool operator==(const RatingMatrix&, const RatingMatrix&) = default;
};

/// Rating of a (user, item) pair is the largest event weight seen for it.
inline RatingMatrix weight_events(const IndexedLog& log) {
    std::map<std::pair<UserId, std::size_t>, int> best;
    for (const IndexedEvent& ev : log.events) {
        int& r = best[{ev.user, ev.item}];
        r = std::max(r, event_weight(ev.type));
    }
    RatingMatrix m{log.user_keys.size(), log.item_keys.size(), {}};
    for (const auto& [key, r] : best) m.entries.push_back({key.first, key.second, r});
    return m;
}

struct FactorConfig {
    std::size_t d = 8;
    double lambda = 0.1;
    std::size_t iterations = 30;
    std::uint64_t seed = 1;
    double init_scale = 0.1;
};

struct FactorModel {
    std::vector<Vec> user_factors;
    std::vector<Vec> item_factors;
    double lambda = 0.0;
    std::size_t iterations = 0;
    std::vector<double> objective;  // initial value, then one entry per half-sweep
    std::vector<std::string> warnings;
};

inline double als_objective(const RatingMatrix& r, const std::vector<Vec>& p, const std::vector<Vec>& q,
                            double lambda) {
    double loss = 0.0;
    for (const Rating& e : r.entries) {
        const double err = static_cast<double>(e.rating) - dot(p[e.user], q[e.item]);
        loss += err * err;
    }
    double reg = 0.0;
    for (const Vec& v : p) reg += dot(v, v);
    for (const Vec& v : q) reg += dot(v, v);
    return loss + lambda * reg;
}

inline double observed_rmse(const RatingMatrix& r, const FactorModel& f) {
    if (r.entries.empty()) return 0.0;
    double s = 0.0;
    for (const Rating& e : r.entries) {
        const double err = static_cast<double>(e.rating) - dot(f.user_factors[e.user], f.item_factors[e.item]);
        s += err * err;
    }
    return std::sqrt(s / static_cast<double>(r.entries.size()));
}

namespace detail {

// One ALS half-sweep: every row of `solve_for` becomes the exact ridge
// minimizer given `fixed`. `by_row[i]` lists (other index, rating) pairs.
inline void als_half_sweep(std::vector<Vec>& solve_for, const std::vector<Vec>& fixed,
                           const std::vector<std::vector<std::pair<std::size_t, double>>>& by_row, double lambda) {
    const std::size_t d = fixed.empty() ? 0 : fixed.front().size();
    for (std::size_t i = 0; i < solve_for.size(); ++i) {
        if (by_row[i].empty()) {
            std::fill(solve_for[i].begin(), solve_for[i].end(), 0.0);
            continue;
        }
        Mat a = Mat::identity(d);
        a *= lambda;
        Vec rhs(d, 0.0);
        for (const auto& [j, rating] : by_row[i]) {
            add_outer(a, fixed[j]);
            for (std::size_t k = 0; k < d; ++k) rhs[k] += rating * fixed[j][k];
        }
        solve_for[i] = solve_spd(a, rhs);
    }
}

}  // namespace detail

/// Alternating ridge least squares on the observed entries. Throws
/// numerical_degeneracy if factors go non-finite or the objective rises.
inline FactorModel factorize(const RatingMatrix& r, const FactorConfig& cfg) {
    if (cfg.d < 1) throw invalid_input("factorize: d must be positive");
    if (!(cfg.lambda > 0.0)) throw invalid_input("factorize: lambda must be positive");
    FactorModel f;
    f.lambda = cfg.lambda;
    f.iterations = cfg.iterations;
    if (cfg.d > std::min(r.users, r.items))
        f.warnings.push_back("d = " + std::to_string(cfg.d) + " exceeds min(users, items)");

    Rng rng = make_rng(cfg.seed, "als-init");
    std::normal_distribution<double> init(0.0, cfg.init_scale);
    f.user_factors.assign(r.users, Vec(cfg.d));
    f.item_factors.assign(r.items, Vec(cfg.d));
    for (Vec& v : f.user_factors)
        for (double& x : v) x = init(rng);
    for (Vec& v : f.item_factors)
        for (double& x : v) x = init(rng);

    std::vector<std::vector<std::pair<std::size_t, double>>> by_user(r.users), by_item(r.items);
    for (const Rating& e : r.entries) {
        if (e.user >= r.users || e.item >= r.items) throw data_error("factorize: rating index out of range");
        by_user[e.user].emplace_back(e.item, static_cast<double>(e.rating));
        by_item[e.item].emplace_back(e.user, static_cast<double>(e.rating));
    }

    f.objective.push_back(als_objective(r, f.user_factors, f.item_factors, cfg.lambda));
    auto record = [&](const char* stage) {
        const double obj = als_objective(r, f.user_factors, f.item_factors, cfg.lambda);
        if (!std::isfinite(obj)) throw numerical_degeneracy(std::string("factorize: non-finite factors after ") + stage);
        const double prev = f.objective.back();
        if (obj > prev + 1e-9 * std::max(1.0, std::abs(prev)))
            throw numerical_degeneracy(std::string("factorize: objective increased in ") + stage);
        f.objective.push_back(obj);
    };
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        detail::als_half_sweep(f.user_factors, f.item_factors, by_user, cfg.lambda);
        record("user sweep");
        detail::als_half_sweep(f.item_factors, f.user_factors, by_item, cfg.lambda);
        record("item sweep");
    }
    return f;
}

/// Unit-norm copies of `factors`; zero rows become e_0 and are listed in `flagged`.
inline std::vector<Vec> normalized_contexts(const std::vector<Vec>& factors, std::vector<std::size_t>* flagged = nullptr) {
    std::vector<Vec> out;
    out.reserve(factors.size());
    for (std::size_t i = 0; i < factors.size(); ++i) {
        Vec v = factors[i];
        const double n = std::sqrt(dot(v, v));
        if (n == 0.0 || !std::isfinite(n)) {
            std::fill(v.begin(), v.end(), 0.0);
            if (!v.empty()) v[0] = 1.0;
            if (flagged) flagged->push_back(i);
        } else {
            for (double& x : v) x /= n;
        }
        out.push_back(std::move(v));
    }
    return out;
}

// Text formats:
//   ratings:  "# cocob-ratings 1 <users> <items>" then "user,item,rating" rows
//   factors:  "# cocob-factors 1 <rows> <d>" then "index,f1,...,fd" rows
//   log:      "# cocob-log 1 <users> <items>" then "user,item,weight,timestamp" rows

inline void write_ratings(std::ostream& os, const RatingMatrix& m) {
    os << "# cocob-ratings 1 " << m.users << ' ' << m.items << '\n';
    for (const Rating& e : m.entries) os << e.user << ',' << e.item << ',' << e.rating << '\n';
}

namespace detail {

inline std::vector<std::string_view> read_magic(std::istream& is, std::string& line, std::string_view magic) {
    if (!std::getline(is, line)) throw parse_error("missing '" + std::string(magic) + "' header", 1);
    auto f = io::split(io::trim_cr(line), ' ');
    if (f.size() < 3 || f[0] != "#" || f[1] != magic) throw parse_error("expected '# " + std::string(magic) + "' header", 1);
    if (f[2] != "1") throw parse_error("unsupported " + std::string(magic) + " version", 1);
    return f;
}

}  // namespace detail

inline RatingMatrix read_ratings(std::istream& is) {
    std::string header;
    const auto h = detail::read_magic(is, header, "cocob-ratings");
    if (h.size() != 5) throw parse_error("ratings header needs users and items", 1);
    RatingMatrix m{io::parse_int<std::size_t>(h[3], 1), io::parse_int<std::size_t>(h[4], 1), {}};
    std::string line;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        const auto l = io::trim_cr(line);
        if (l.empty()) continue;
        const auto f = io::split(l);
        if (f.size() != 3) throw parse_error("ratings: expected user,item,rating", lineno);
        m.entries.push_back({io::parse_int<std::size_t>(f[0], lineno), io::parse_int<std::size_t>(f[1], lineno),
                             io::parse_int<int>(f[2], lineno)});
    }
    return m;
}

inline void write_factors(std::ostream& os, const std::vector<Vec>& rows) {
    const std::size_t d = rows.empty() ? 0 : rows.front().size();
    os << "# cocob-factors 1 " << rows.size() << ' ' << d << '\n';
    for (std::size_t i = 0; i < rows.size(); ++i) {
        os << i;
        for (double x : rows[i]) os << ',' << io::format_double(x);
        os << '\n';
    }
}

inline std::vector<Vec> read_factors(std::istream& is) {
    std::string header;
    const auto h = detail::read_magic(is, header, "cocob-factors");
    if (h.size() != 5) throw parse_error("factors header needs rows and d", 1);
    const auto rows = io::parse_int<std::size_t>(h[3], 1);
    const auto d = io::parse_int<std::size_t>(h[4], 1);
    std::vector<Vec> out;
    std::string line;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        const auto l = io::trim_cr(line);
        if (l.empty()) continue;
        const auto f = io::split(l);
        if (f.size() != d + 1) throw parse_error("factors: wrong field count", lineno);
        if (io::parse_int<std::size_t>(f[0], lineno) != out.size()) throw parse_error("factors: rows out of order", lineno);
        Vec v(d);
        for (std::size_t k = 0; k < d; ++k) v[k] = io::parse_double(f[k + 1], lineno);
        out.push_back(std::move(v));
    }
    if (out.size() != rows) throw parse_error("factors: row count does not match header");
    return out;
}

inline void write_indexed_log(std::ostream& os, const IndexedLog& log) {
    os << "# cocob-log 1 " << log.user_keys.size() << ' ' << log.item_keys.size() << '\n';
    for (const IndexedEvent& ev : log.events)
        os << ev.user << ',' << ev.item << ',' << event_weight(ev.type) << ',' << ev.timestamp << '\n';
}

/// Reads a filtered log back as replayable interactions over `item_contexts`.
inline InteractionLog read_interaction_log(std::istream& is, std::vector<Vec> item_contexts,
                                           RelevantSet relevant = RelevantSet::full) {
    std::string header;
    const auto h = detail::read_magic(is, header, "cocob-log");
    if (h.size() != 5) throw parse_error("log header needs users and items", 1);
    const auto users = io::parse_int<std::size_t>(h[3], 1);
    std::vector<Interaction> events;
    std::string line;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        const auto l = io::trim_cr(line);
        if (l.empty()) continue;
        const auto f = io::split(l);
        if (f.size() != 4) throw parse_error("log: expected user,item,weight,timestamp", lineno);
        events.push_back({io::parse_int<std::size_t>(f[0], lineno), io::parse_int<std::size_t>(f[1], lineno),
                          io::parse_int<int>(f[2], lineno), io::parse_int<std::int64_t>(f[3], lineno)});
    }
    return InteractionLog(std::move(events), users, std::move(item_contexts), relevant);
}

inline void write_keys(std::ostream& os, const std::vector<std::string>& keys) {
    os << "index,key\n";
    for (std::size_t i = 0; i < keys.size(); ++i) os << i << ',' << keys[i] << '\n';
}

}  // namespace cocob
