#pragma once

#include "decongest/rng.hpp"
#include "decongest/types.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace decongest {

struct Rating {
    int user = 0;  // dense index
    int item = 0;  // dense index
    double value = 0.0;
};

/// Sparse ratings with maps from dense indices back to file ids.
struct RatingSet {
    std::vector<Rating> entries;
    std::vector<long> user_ids;
    std::vector<long> item_ids;
    std::vector<long> timestamps;

    int num_users() const { return static_cast<int>(user_ids.size()); }
    int num_items() const { return static_cast<int>(item_ids.size()); }
};

namespace detail {

inline long parse_long(const std::string& field, std::size_t line_no, const char* what)
{
    long out = 0;
    const auto* first = field.data();
    const auto* last = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last) {
        throw Error("ratings line " + std::to_string(line_no) + ": malformed " + what + " '" + field + "'");
    }
    return out;
}

}  // namespace detail

/// Parses "user_id<TAB>item_id<TAB>rating<TAB>timestamp" lines (ratings 1..5).
inline RatingSet parse_ratings(std::istream& in)
{
    RatingSet set;
    std::map<long, int> users, items;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::size_t start = 0;
        for (;;) {
            const std::size_t tab = line.find('\t', start);
            fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        if (fields.size() != 4) {
            throw Error("ratings line " + std::to_string(line_no) + ": expected 4 tab-separated fields, got " +
                        std::to_string(fields.size()));
        }
        const long uid = detail::parse_long(fields[0], line_no, "user id");
        const long iid = detail::parse_long(fields[1], line_no, "item id");
        const long rating = detail::parse_long(fields[2], line_no, "rating");
        const long ts = detail::parse_long(fields[3], line_no, "timestamp");
        if (rating < 1 || rating > 5) {
            throw Error("ratings line " + std::to_string(line_no) + ": rating " + std::to_string(rating) +
                        " outside 1..5");
        }
        auto [uit, unew] = users.try_emplace(uid, static_cast<int>(set.user_ids.size()));
        if (unew) set.user_ids.push_back(uid);
        auto [iit, inew] = items.try_emplace(iid, static_cast<int>(set.item_ids.size()));
        if (inew) set.item_ids.push_back(iid);
        set.entries.push_back(Rating{uit->second, iit->second, static_cast<double>(rating)});
        set.timestamps.push_back(ts);
    }
    if (set.entries.empty()) throw Error("ratings: no ratings found");
    return set;
}

inline RatingSet ingest_ratings(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw Error("ratings: cannot open '" + path + "'");
    return parse_ratings(in);
}

inline void write_ratings(std::ostream& out, const RatingSet& set)
{
    for (std::size_t k = 0; k < set.entries.size(); ++k) {
        const Rating& r = set.entries[k];
        out << set.user_ids[r.user] << '\t' << set.item_ids[r.item] << '\t' << static_cast<long>(std::lround(r.value))
            << '\t' << (k < set.timestamps.size() ? set.timestamps[k] : 0L) << '\n';
    }
}

/// Low-rank synthetic ratings in the same file layout; stands in for a public
/// ratings dump when none is available.
struct SyntheticRatingsSpec {
    int users = 400;
    int items = 300;
    int rank = 8;
    double density = 0.25;
    double noise = 0.5;
    std::uint64_t seed = 0;
};

inline RatingSet generate_ratings(const SyntheticRatingsSpec& spec)
{
    require(spec.users > 0 && spec.items > 0 && spec.rank > 0, "synthetic ratings: sizes must be positive");
    require(spec.density > 0.0 && spec.density <= 1.0, "synthetic ratings: density must lie in (0, 1]");
    Rng rng(spec.seed);
    Matrix p(spec.users, spec.rank), q(spec.items, spec.rank);
    // Sparse-ish latent factors give users distinct tastes.
    for (Eigen::Index k = 0; k < p.size(); ++k) p(k) = std::pow(rng.uniform(), 3.0);
    for (Eigen::Index k = 0; k < q.size(); ++k) q(k) = std::pow(rng.uniform(), 3.0);
    Matrix affinity = p * q.transpose();
    affinity /= affinity.maxCoeff();

    RatingSet set;
    for (int u = 0; u < spec.users; ++u) set.user_ids.push_back(u + 1);
    for (int i = 0; i < spec.items; ++i) set.item_ids.push_back(i + 1);
    long clock = 874724710;
    for (int u = 0; u < spec.users; ++u) {
        for (int i = 0; i < spec.items; ++i) {
            if (rng.uniform() >= spec.density) continue;
            const double raw = 1.0 + 4.0 * affinity(u, i) + spec.noise * (rng.uniform() - 0.5) * 2.0;
            const double rating = std::clamp(std::round(raw), 1.0, 5.0);
            set.entries.push_back(Rating{u, i, rating});
            set.timestamps.push_back(clock++);
        }
    }
    require(!set.entries.empty(), "synthetic ratings: density too low, no ratings drawn");
    return set;
}

}  // namespace decongest
