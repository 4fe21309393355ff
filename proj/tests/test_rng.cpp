#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cstdint>
#include <vector>

#include "banditlab/rng.hpp"

using namespace banditlab;

TEST_CASE("philox block matches the published known-answer vectors") {
    // Salmon et al. reference vectors for philox4x32-10.
    auto r0 = Philox::block({0u, 0u, 0u, 0u}, {0u, 0u});
    CHECK(r0 == std::array<std::uint32_t, 4>{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu,
                                             0x9b00dbd8u});

    auto r1 = Philox::block({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                            {0xffffffffu, 0xffffffffu});
    CHECK(r1 == std::array<std::uint32_t, 4>{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u,
                                             0x6d5451fdu});

    auto r2 = Philox::block({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                            {0xa4093822u, 0x299f31d0u});
    CHECK(r2 == std::array<std::uint32_t, 4>{0xd16cfe09u, 0x94fdccebu, 0x5001e420u,
                                             0x24126ea1u});
}

TEST_CASE("same (seed, stream) reproduces the same draws") {
    Philox a(42, 7), b(42, 7);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("distinct streams and seeds decorrelate") {
    Philox a(42, 0), b(42, 1), c(43, 0);
    bool stream_differs = false, seed_differs = false;
    for (int i = 0; i < 16; ++i) {
        std::uint64_t va = a.next_u64();
        if (va != b.next_u64()) stream_differs = true;
        if (va != c.next_u64()) seed_differs = true;
    }
    CHECK(stream_differs);
    CHECK(seed_differs);
}

TEST_CASE("substream restarts an independent stream deterministically") {
    Philox a(9, 0);
    a.next_u64();
    Philox sub = a.substream(5);
    Philox fresh(9, 5);
    for (int i = 0; i < 20; ++i) CHECK(sub.next_u64() == fresh.next_u64());
}

TEST_CASE("uniform lies in [0, 1) and fills the range") {
    Philox rng(1, 0);
    double lo = 1.0, hi = 0.0;
    for (int i = 0; i < 10000; ++i) {
        double u = rng.uniform();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    CHECK(lo < 0.01);
    CHECK(hi > 0.99);
}

TEST_CASE("uniform_index covers every bucket") {
    Philox rng(2, 0);
    std::vector<int> counts(5, 0);
    for (int i = 0; i < 5000; ++i) {
        auto k = rng.uniform_index(5);
        REQUIRE(k < 5);
        ++counts[static_cast<int>(k)];
    }
    for (int c : counts) CHECK(c > 800);
}

TEST_CASE("sample_index uses ascending inverse-CDF order") {
    std::vector<double> w{0.2, 0.5, 0.3};
    CHECK(sample_index(w, 0.0) == 0);
    CHECK(sample_index(w, 0.1999) == 0);
    CHECK(sample_index(w, 0.2) == 1);
    CHECK(sample_index(w, 0.6999) == 1);
    CHECK(sample_index(w, 0.7) == 2);
    CHECK(sample_index(w, 0.9999) == 2);
    // Fallback on accumulated rounding: the last index absorbs the tail.
    CHECK(sample_index(w, 1.0) == 2);
}

TEST_CASE("sample_index handles a single bucket") {
    std::vector<double> w{1.0};
    CHECK(sample_index(w, 0.0) == 0);
    CHECK(sample_index(w, 0.999) == 0);
}
