#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "eitpod/error.hpp"
#include "eitpod/hash.hpp"

namespace eitpod {

/// Four-electrode measurement: current enters at drive_pos and leaves at
/// drive_neg; the reading is U(sense_pos) - U(sense_neg).
struct Measurement {
    int drive_pos = 0;
    int drive_neg = 0;
    int sense_pos = 0;
    int sense_neg = 0;

    std::array<int, 4> electrodes() const { return {drive_pos, drive_neg, sense_pos, sense_neg}; }
    bool involves(int e) const {
        return drive_pos == e || drive_neg == e || sense_pos == e || sense_neg == e;
    }
    friend bool operator==(const Measurement&, const Measurement&) = default;
};

struct Protocol {
    int electrode_count = 0;
    std::vector<Measurement> measurements;
    std::vector<std::optional<std::size_t>> onsager_partner;

    std::size_t size() const { return measurements.size(); }
};

/// Maximum number of independent four-point measurements with C contacts.
inline int max_independent(int electrode_count) {
    detail::require(electrode_count >= 3, "max_independent: need at least 3 electrodes");
    return electrode_count * (electrode_count - 3) / 2;
}

/// Links every measurement to the one with drive and sense pairs swapped, if present.
inline std::vector<std::optional<std::size_t>> find_onsager_partners(
    const std::vector<Measurement>& ms) {
    std::vector<std::optional<std::size_t>> partner(ms.size());
    for (std::size_t i = 0; i < ms.size(); ++i) {
        const Measurement swapped{ms[i].sense_pos, ms[i].sense_neg, ms[i].drive_pos, ms[i].drive_neg};
        auto it = std::find(ms.begin(), ms.end(), swapped);
        if (it != ms.end()) partner[i] = static_cast<std::size_t>(it - ms.begin());
    }
    return partner;
}

inline void validate(const Protocol& p) {
    if (p.electrode_count < 4) throw DataError("protocol: electrode_count must be >= 4");
    if (p.onsager_partner.size() != p.measurements.size())
        throw DataError("protocol: partner table size mismatch");
    for (const auto& m : p.measurements) {
        auto e = m.electrodes();
        for (int v : e)
            if (v < 0 || v >= p.electrode_count) throw DataError("protocol: electrode index out of range");
        std::sort(e.begin(), e.end());
        if (std::adjacent_find(e.begin(), e.end()) != e.end())
            throw DataError("protocol: measurement electrodes must be distinct");
    }
}

/// Adjacent-drive / adjacent-sense ("skip") protocol, drive-major with sense
/// pairs in ascending order; D = C(C-3).
inline Protocol skip_protocol(int electrode_count) {
    detail::require(electrode_count >= 5, "skip_protocol: need at least 5 electrodes");
    const int c = electrode_count;
    Protocol p;
    p.electrode_count = c;
    for (int i = 0; i < c; ++i) {
        const int i1 = (i + 1) % c;
        for (int j = 0; j < c; ++j) {
            const int j1 = (j + 1) % c;
            if (j == i || j == i1 || j1 == i || j1 == i1) continue;
            p.measurements.push_back({i, i1, j, j1});
        }
    }
    p.onsager_partner = find_onsager_partners(p.measurements);
    return p;
}

/// Indices of measurements whose electrodes all avoid `bad`, in protocol order.
inline std::vector<std::size_t> valid_subset(const Protocol& p, const std::set<int>& bad) {
    for (int b : bad)
        detail::require(b >= 0 && b < p.electrode_count, "valid_subset: bad electrode out of range");
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < p.measurements.size(); ++i) {
        const auto e = p.measurements[i].electrodes();
        if (std::none_of(e.begin(), e.end(), [&](int v) { return bad.count(v) != 0; }))
            keep.push_back(i);
    }
    if (keep.empty()) throw InvalidArgument("valid_subset: every measurement touches a bad electrode");
    return keep;
}

/// Keeps the first member of each Onsager pair, giving a D_0-sized protocol.
inline Protocol deduplicate_onsager(const Protocol& p) {
    Protocol out;
    out.electrode_count = p.electrode_count;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const auto& partner = p.onsager_partner[i];
        if (partner && *partner < i) continue;
        out.measurements.push_back(p.measurements[i]);
    }
    out.onsager_partner = find_onsager_partners(out.measurements);
    return out;
}

inline nlohmann::json to_json(const Protocol& p) {
    nlohmann::json ms = nlohmann::json::array();
    for (const auto& m : p.measurements)
        ms.push_back({m.drive_pos, m.drive_neg, m.sense_pos, m.sense_neg});
    return {{"electrode_count", p.electrode_count}, {"measurements", ms}};
}

inline Protocol protocol_from_json(const nlohmann::json& j) {
    Protocol p;
    try {
        p.electrode_count = j.at("electrode_count").get<int>();
        for (const auto& m : j.at("measurements"))
            p.measurements.push_back(
                {m.at(0).get<int>(), m.at(1).get<int>(), m.at(2).get<int>(), m.at(3).get<int>()});
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("protocol: malformed JSON: ") + e.what());
    }
    p.onsager_partner = find_onsager_partners(p.measurements);
    validate(p);
    return p;
}

/// Short content hash of the protocol's canonical JSON.
inline std::string protocol_id(const Protocol& p) { return short_hash(to_json(p).dump()); }

}  // namespace eitpod
