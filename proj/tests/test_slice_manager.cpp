#include <catch_amalgamated.hpp>

#include "cdnslice/slice_manager.hpp"
#include "test_support.hpp"

using namespace cdnslice;
using namespace cdnslice::testing;
using Catch::Approx;

namespace {

Catalog small_catalog() {
    return Catalog({CloudSpec{"east", "East", 20,
                              {Flavor{"e1", "", 1, 512, 0.05}, Flavor{"e2", "", 2, 2048, 0.12},
                               Flavor{"e4", "", 4, 4096, 0.20}}},
                    CloudSpec{"west", "West", 6, {Flavor{"w1", "", 1, 512, 0.04}, Flavor{"w2", "", 2, 2048, 0.10}}}});
}

SliceRequest request(std::vector<RegionRequest> regions) {
    SliceRequest r;
    r.customer_id = "acme";
    r.regions = std::move(regions);
    return r;
}

EdmDecision decision(DecisionKind kind, std::uint64_t epoch) {
    EdmDecision d;
    d.kind = kind;
    d.epoch = epoch;
    return d;
}

// Sessions each oracle vCPU carries at q = k/100, then the ceiling quotient.
std::int64_t vcpu_oracle(std::int64_t n, int k) {
    const auto per = streams_oracle(k);
    return std::max<std::int64_t>(1, (n + per - 1) / per);
}

} // namespace

TEST_CASE("vCPU dimensioning", "[slice][dimension]") {
    CHECK(required_vcpus(20000, 4.5) == 3);
    CHECK(required_vcpus(6913, 4.5) == 1);
    CHECK(required_vcpus(6914, 4.5) == 2);
    CHECK(required_vcpus(1, 1.0) == 1);
    CHECK(required_vcpus(0, 4.0) == 0);
    CHECK_THROWS_AS(required_vcpus(10, 5.0), InvalidQoeTarget);
    Rng rng(8);
    for (int trial = 0; trial < 2000; ++trial) {
        const auto n = uniform_int(rng, 1, 400000);
        const int k = static_cast<int>(uniform_int(rng, 100, 499));
        INFO("n=" << n << " k=" << k);
        CHECK(required_vcpus(n, k / 100.0) == vcpu_oracle(n, k));
    }
}

TEST_CASE("dimensioning picks the cheapest covering flavors", "[slice][dimension]") {
    const auto cat = small_catalog();
    SECTION("cheapest cloud wins") {
        const auto plans = dimension_slice(request({{"r1", 20000, 4.5, ""}}), cat);
        REQUIRE(plans.size() == 1);
        CHECK(plans[0].vcpus == 3);
        CHECK(plans[0].cloud_id == "west");
        CHECK(plans[0].cost_per_hour == Approx(0.12)); // three w1
    }
    SECTION("pinned cloud") {
        const auto plans = dimension_slice(request({{"r1", 20000, 4.5, "east"}}), cat);
        CHECK(plans[0].cost_per_hour == Approx(0.15));
        CHECK(plans[0].flavors == std::vector<std::string>{"e1", "e1", "e1"});
    }
    SECTION("equal cost prefers fewer instances") {
        const auto four = dimension_slice(request({{"r1", 4 * 6913, 4.5, "east"}}), cat);
        CHECK(four[0].flavors == std::vector<std::string>{"e4"});
    }
    SECTION("regions consume capacity in order") {
        const auto plans = dimension_slice(request({{"a", 5 * 6913, 4.5, ""}, {"b", 5 * 6913, 4.5, ""}}), cat);
        CHECK(plans[0].cloud_id == "west");
        CHECK(plans[1].cloud_id == "east");
    }
    SECTION("capacity exhausted") {
        CHECK_THROWS_AS(dimension_slice(request({{"a", 30 * 6913, 4.5, ""}}), cat), CapacityError);
    }
    SECTION("dormant region") {
        const auto plans = dimension_slice(request({{"a", 0, 4.5, ""}}), cat);
        CHECK(plans[0].dormant());
        CHECK(plans[0].flavors.empty());
    }
    SECTION("invalid QoE target") {
        CHECK_THROWS_AS(dimension_slice(request({{"a", 100, 5.0, ""}}), cat), InvalidQoeTarget);
    }
}

TEST_CASE("cover oracle agreement", "[slice][dimension][property]") {
    // Exhaustive count enumeration against the DP on one cloud.
    const auto cat = small_catalog();
    const auto& east = cat.cloud(0);
    for (std::int64_t need = 1; need <= 20; ++need) {
        double best = 1e9;
        for (int a = 0; a <= 20; ++a)
            for (int b = 0; 2 * b <= 20; ++b)
                for (int c = 0; 4 * c <= 20; ++c) {
                    const int cpu = a + 2 * b + 4 * c;
                    if (cpu < need || cpu > 20) continue;
                    best = std::min(best, 0.05 * a + 0.12 * b + 0.20 * c);
                }
        const auto got = detail::cheapest_cover(cat, east, need, 20);
        REQUIRE(got);
        double cost = 0.0;
        for (auto j : got->flavors) cost += cat.flavor(j).cost_per_hour;
        CHECK(cost == Approx(best));
    }
}

TEST_CASE("slice creation and boot", "[slice]") {
    const auto cat = small_catalog();
    SliceState s("s1", request({{"a", 6000, 4.5, "east"}, {"b", 0, 4.0, ""}}), cat, {}, 0.0);
    CHECK(s.dormant("b"));
    CHECK(s.members("a", Phase::Booting).size() == 1);
    CHECK(s.metrics("a").instances == 0);
    s.advance_to(10.0);
    CHECK(s.metrics("a").instances == 1);
    CHECK(s.metrics("a").accrued_cost == 0.0);
    s.advance_to(10.0 + 7200.0);
    CHECK(s.metrics("a").accrued_cost == Approx(0.10)); // e1 at $0.05/h
    CHECK(s.log().size() == 2);
}

TEST_CASE("cost of one instance over two hours", "[slice]") {
    const Catalog cat({CloudSpec{"c", "C", 4, {Flavor{"f2", "", 2, 2048, 0.12}}}});
    SliceState s("s", request({{"a", 10000, 4.5, ""}}), cat, {0.0, 0.0}, 0.0);
    s.advance_to(7200.0);
    CHECK(s.accrued_cost() == Approx(0.24));
    CHECK(s.metrics("a").cost_usd_h == Approx(0.12));
}

TEST_CASE("reallocation boots the new flavor then drains the old", "[slice][changeover]") {
    const auto cat = small_catalog();
    SliceState s("s", request({{"a", 6000, 4.5, "east"}}), cat, {10.0, 8.0}, -10.0);
    s.advance_to(0.0);
    s.route("a", 8000.0);
    const auto old_id = s.members("a", Phase::Active).front()->snap.instance_id;

    auto d = decision(DecisionKind::Reallocate, 0);
    AssignmentSolution plan;
    plan.assignment[old_id] = "e2";
    plan.status = SolveStatus::Optimal;
    d.plan = plan;
    const double trigger = 60.0;
    s.apply_decision("a", d, trigger);
    CHECK(s.epoch("a") == 1);

    double released = -1.0;
    for (double t = trigger; t <= trigger + 40.0; t += 0.5) {
        s.advance_to(t);
        REQUIRE(s.continuity_holds());
        REQUIRE(s.sessions_conserved("a"));
        const auto& old = s.instances().at(old_id);
        if (old.phase == Phase::Terminated && released < 0) released = old.terminated_at;
    }
    CHECK(released - trigger == Approx(18.0));
    CHECK(released - trigger >= 15.0);
    CHECK(released - trigger <= 20.0);
    const auto active = s.members("a", Phase::Active);
    REQUIRE(active.size() == 1);
    CHECK(active.front()->snap.current_flavor == "e2");
    CHECK(active.front()->snap.sessions == 8000.0);

    SECTION("re-applying the same epoch is a no-op") {
        const auto before = s.log().size();
        s.apply_decision("a", d, trigger + 50.0);
        CHECK(s.log().size() == before);
        CHECK(s.epoch("a") == 1);
    }
    SECTION("other epochs are stale") {
        CHECK_THROWS_AS(s.apply_decision("a", decision(DecisionKind::NoAction, 7), trigger + 50.0), StaleDecision);
    }
}

TEST_CASE("no action only logs", "[slice]") {
    const auto cat = small_catalog();
    SliceState s("s", request({{"a", 6000, 4.5, "east"}}), cat, {}, 0.0);
    s.advance_to(20.0);
    const auto before = s.instances();
    s.apply_decision("a", decision(DecisionKind::NoAction, 0), 30.0);
    CHECK(s.instances().size() == before.size());
    CHECK(s.log().back().kind == "NoAction");
}

TEST_CASE("scale-out and scale-in change the instance count", "[slice]") {
    const auto cat = small_catalog();
    SliceState s("s", request({{"a", 6000, 4.5, "east"}}), cat, {10.0, 8.0}, 0.0);
    s.advance_to(10.0);
    s.route("a", 4000.0);
    auto out = decision(DecisionKind::ScaleOut, 0);
    InstanceSnapshot fresh;
    fresh.instance_id = "~new-1";
    fresh.current_flavor = "e1";
    out.added.push_back(fresh);
    s.apply_decision("a", out, 20.0);
    s.advance_to(31.0);
    CHECK(s.metrics("a").instances == 2);
    CHECK(s.members("a", Phase::Active)[1]->snap.sessions == 2000.0);

    SECTION("scale in drains the victim") {
        auto in = decision(DecisionKind::ScaleIn, 1);
        in.removed.push_back(s.members("a", Phase::Active)[0]->snap.instance_id);
        s.apply_decision("a", in, 40.0);
        CHECK(s.metrics("a").instances == 1);
        CHECK(s.metrics("a").draining == 1);
        CHECK(s.sessions_conserved("a"));
        s.advance_to(48.0);
        CHECK(s.metrics("a").draining == 0);
    }
    SECTION("last instance is never removed") {
        auto in = decision(DecisionKind::ScaleIn, 1);
        for (const auto* i : s.members("a", Phase::Active)) in.removed.push_back(i->snap.instance_id);
        s.apply_decision("a", in, 40.0);
        CHECK(s.log().back().kind == "Alarm");
        CHECK(s.metrics("a").instances == 2);
    }
}

TEST_CASE("random decision sequences keep continuity, conservation and cost accounting", "[slice][property]") {
    const auto cat = small_catalog();
    Rng rng(123);
    for (int trial = 0; trial < 200; ++trial) {
        SliceState s("s", request({{"a", 6000, 4.0, "east"}}), cat,
                     {uniform_real(rng, 0.0, 15.0), uniform_real(rng, 0.0, 10.0)}, -20.0);
        double t = 0.0;
        s.advance_to(t);
        double last_cost = 0.0;
        for (int step = 0; step < 20; ++step) {
            t += uniform_real(rng, 1.0, 40.0);
            s.advance_to(t);
            s.route("a", uniform_real(rng, 0.0, 20000.0));
            const auto active = s.members("a", Phase::Active);
            auto d = decision(static_cast<DecisionKind>(uniform_int(rng, 0, 4)), s.epoch("a"));
            AssignmentSolution plan;
            for (const auto* inst : active)
                plan.assignment[inst->snap.instance_id] = cat.flavor(uniform_int(rng, 0, 2)).id;
            if (d.kind == DecisionKind::ScaleOut) {
                InstanceSnapshot f;
                f.instance_id = "~new-1";
                f.current_flavor = "e1";
                d.added.push_back(f);
                plan.assignment["~new-1"] = "e1";
            }
            if (d.kind == DecisionKind::ScaleIn && !active.empty())
                d.removed.push_back(active[uniform_int(rng, 0, static_cast<std::int64_t>(active.size()) - 1)]
                                        ->snap.instance_id);
            if (d.kind != DecisionKind::Alarm && d.kind != DecisionKind::NoAction) d.plan = plan;
            if (s.changing("a")) continue;
            s.apply_decision("a", d, t);
            REQUIRE(s.continuity_holds());
            REQUIRE(s.sessions_conserved("a"));
            REQUIRE(s.accrued_cost() >= last_cost);
            last_cost = s.accrued_cost();
        }
        s.advance_to(t + 100.0);
        double expect = 0.0;
        for (const auto& [id, inst] : s.instances()) {
            const double price = cat.flavor(cat.flavor_index(inst.snap.current_flavor)).cost_per_hour;
            const double from = inst.phase == Phase::Booting ? t + 100.0 : inst.active_at;
            const double to = inst.terminated_at < 0 ? t + 100.0 : inst.terminated_at;
            expect += price * std::max(0.0, to - from) / 3600.0;
        }
        CHECK(s.accrued_cost() == Approx(expect).epsilon(1e-9));
    }
}
