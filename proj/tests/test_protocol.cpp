#include <algorithm>
#include <map>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "eitpod/protocol.hpp"
#include "support.hpp"

using namespace eitpod;

TEST(Protocol, MaxIndependent) {
    EXPECT_EQ(max_independent(8), 20);
    EXPECT_EQ(max_independent(16), 104);
    EXPECT_EQ(max_independent(3), 0);
    EXPECT_THROW(max_independent(2), InvalidArgument);
}

TEST(Protocol, SkipEightHasFortyMeasurements) {
    const Protocol p = skip_protocol(8);
    EXPECT_EQ(p.size(), 40u);
    EXPECT_EQ(p.size(), 2u * static_cast<std::size_t>(max_independent(8)));
    const Measurement first{0, 1, 2, 3};
    EXPECT_EQ(p.measurements.front(), first);
}

TEST(Protocol, SizeIsTwiceMaxIndependent) {
    for (int c = 5; c <= 24; ++c)
        EXPECT_EQ(skip_protocol(c).size(), 2u * static_cast<std::size_t>(max_independent(c))) << c;
}

TEST(Protocol, RejectsFewerThanFiveElectrodes) { EXPECT_THROW(skip_protocol(4), InvalidArgument); }

TEST(Protocol, DriveMajorSenseAscending) {
    const Protocol p = skip_protocol(8);
    for (std::size_t i = 1; i < p.size(); ++i) {
        const auto& a = p.measurements[i - 1];
        const auto& b = p.measurements[i];
        EXPECT_TRUE(a.drive_pos < b.drive_pos || (a.drive_pos == b.drive_pos && a.sense_pos < b.sense_pos));
    }
}

TEST(Protocol, TuplesAreDistinctAndDisjoint) {
    for (int c = 5; c <= 12; ++c) {
        for (const auto& m : skip_protocol(c).measurements) {
            auto e = m.electrodes();
            std::sort(e.begin(), e.end());
            EXPECT_EQ(std::adjacent_find(e.begin(), e.end()), e.end());
            EXPECT_EQ(m.drive_neg, (m.drive_pos + 1) % c);
            EXPECT_EQ(m.sense_neg, (m.sense_pos + 1) % c);
        }
    }
}

TEST(Protocol, SameTuplesAsBruteForce) {
    for (int c = 5; c <= 12; ++c) {
        std::set<std::array<int, 4>> want;
        for (const auto& t : support::brute_force_tuples(c)) want.insert(t);
        std::set<std::array<int, 4>> got;
        for (const auto& m : skip_protocol(c).measurements) got.insert(m.electrodes());
        EXPECT_EQ(got, want) << c;
    }
}

TEST(Protocol, OnsagerPartnersFormAPerfectInvolution) {
    const Protocol p = skip_protocol(8);
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        ASSERT_TRUE(p.onsager_partner[i].has_value());
        const auto j = *p.onsager_partner[i];
        EXPECT_NE(i, j);
        EXPECT_EQ(*p.onsager_partner[j], i);
        const auto& a = p.measurements[i];
        const auto& b = p.measurements[j];
        EXPECT_EQ(a.drive_pos, b.sense_pos);
        EXPECT_EQ(a.sense_pos, b.drive_pos);
        if (i < j) ++pairs;
    }
    EXPECT_EQ(pairs, 20u);
}

TEST(ValidSubset, NoBadElectrodesKeepsEverything) {
    const auto v = valid_subset(skip_protocol(8), {});
    ASSERT_EQ(v.size(), 40u);
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(v[i], i);
}

// Oracle: filter the independently generated tuples; the count is 20 for every
// electrode (10 drive-adjacent measurements plus their 10 Onsager partners).
TEST(ValidSubset, SingleDropoutMatchesBruteForceFilter) {
    const Protocol p = skip_protocol(8);
    const auto tuples = support::brute_force_tuples(8);
    for (int e = 0; e < 8; ++e) {
        std::set<std::array<int, 4>> want;
        for (const auto& t : tuples)
            if (std::find(t.begin(), t.end(), e) == t.end()) want.insert(t);
        const auto v = valid_subset(p, {e});
        std::set<std::array<int, 4>> got;
        for (auto i : v) got.insert(p.measurements[i].electrodes());
        EXPECT_EQ(got, want) << "electrode " << e;
        EXPECT_EQ(v.size(), 20u) << "electrode " << e;
        EXPECT_TRUE(std::is_sorted(v.begin(), v.end()));
    }
}

TEST(ValidSubset, FiveConsecutiveBadElectrodesLeaveNothing) {
    const auto tuples = support::brute_force_tuples(8);
    const std::set<int> bad{0, 1, 2, 3, 4};
    EXPECT_TRUE(std::all_of(tuples.begin(), tuples.end(), [&](const auto& t) {
        return std::any_of(t.begin(), t.end(), [&](int v) { return bad.count(v) != 0; });
    }));
    EXPECT_THROW(valid_subset(skip_protocol(8), bad), InvalidArgument);
}

TEST(ValidSubset, OutOfRangeElectrode) {
    EXPECT_THROW(valid_subset(skip_protocol(8), {8}), InvalidArgument);
    EXPECT_THROW(valid_subset(skip_protocol(8), {-1}), InvalidArgument);
}

TEST(ValidSubset, MonotoneInTheBadSet) {
    const Protocol p = skip_protocol(10);
    std::mt19937 rng(3);
    std::uniform_int_distribution<int> pick(0, 9);
    for (int trial = 0; trial < 200; ++trial) {
        std::set<int> small;
        for (int k = 0; k < 2; ++k) small.insert(pick(rng));
        std::set<int> big = small;
        big.insert(pick(rng));
        const auto a = valid_subset(p, small);
        std::vector<std::size_t> b;
        try {
            b = valid_subset(p, big);
        } catch (const InvalidArgument&) {
            continue;
        }
        EXPECT_TRUE(std::includes(a.begin(), a.end(), b.begin(), b.end()));
    }
}

TEST(Protocol, LabelRotationPermutesMeasurements) {
    for (int c : {5, 8, 11}) {
        const Protocol p = skip_protocol(c);
        std::map<std::array<int, 4>, std::size_t> where;
        for (std::size_t i = 0; i < p.size(); ++i) where[p.measurements[i].electrodes()] = i;
        for (int r = 1; r < c; ++r) {
            std::set<std::size_t> hit;
            for (const auto& m : p.measurements) {
                std::array<int, 4> t = m.electrodes();
                for (int& v : t) v = (v + r) % c;
                auto it = where.find(t);
                ASSERT_NE(it, where.end());
                hit.insert(it->second);
            }
            EXPECT_EQ(hit.size(), p.size());
        }
    }
}

TEST(Protocol, DeduplicationKeepsOneOfEachPair) {
    const Protocol d = deduplicate_onsager(skip_protocol(8));
    EXPECT_EQ(d.size(), 20u);
    for (const auto& partner : d.onsager_partner) EXPECT_FALSE(partner.has_value());
}

TEST(Protocol, JsonRoundTripAndHash) {
    const Protocol p = skip_protocol(8);
    const Protocol back = protocol_from_json(nlohmann::json::parse(to_json(p).dump()));
    EXPECT_EQ(back.measurements, p.measurements);
    EXPECT_EQ(back.onsager_partner, p.onsager_partner);
    EXPECT_EQ(protocol_id(back), protocol_id(p));
    EXPECT_EQ(protocol_id(p).size(), 16u);
    EXPECT_NE(protocol_id(p), protocol_id(skip_protocol(9)));
}

TEST(Protocol, MalformedJsonIsRejected) {
    auto j = to_json(skip_protocol(8));
    j["measurements"][0] = nlohmann::json::array({0, 0, 2, 3});
    EXPECT_THROW(protocol_from_json(j), DataError);
    j = to_json(skip_protocol(8));
    j["measurements"][0] = nlohmann::json::array({0, 1, 2, 9});
    EXPECT_THROW(protocol_from_json(j), DataError);
    EXPECT_THROW(protocol_from_json(nlohmann::json::array()), DataError);
}
