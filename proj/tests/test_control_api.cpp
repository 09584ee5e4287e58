#include <catch_amalgamated.hpp>

#include "cdnslice/control_api.hpp"

#include <future>

using namespace cdnslice;
using nlohmann::json;

namespace {

ServiceConfig service_config() {
    const auto sc = load_scenario(std::string(CDNSLICE_CONFIG_DIR) + "/load_step.json");
    return ServiceConfig::from_scenario(sc);
}

const char* kRequest = R"({
  "customer_id": "acme",
  "monitoring_period_s": 60,
  "regions": [{"region_id": "north", "max_streams": 6000, "q_min": 4.5, "cloud_id": "edge-a"}]
})";

} // namespace

TEST_CASE("create then inspect a slice", "[api]") {
    ControlService svc(service_config());
    const auto created = svc.create_slice(kRequest);
    REQUIRE(created.status == 201);
    const std::string id = created.body.at("slice_id");
    CHECK(!id.empty());

    const auto got = svc.get_slice(id);
    REQUIRE(got.status == 200);
    // one vCPU covers 6000 streams at q_min 4.5; the cheapest such flavor is a.small
    const auto& dim = got.body.at("dimensioning").at(0);
    CHECK(dim.at("vcpus") == 1);
    CHECK(dim.at("flavors") == json::array({"a.small"}));
    CHECK(got.body.at("instances").size() == 1);
    CHECK(got.body.at("instances").at(0).at("phase") == "Booting");

    const auto log = svc.get_decisions(id);
    REQUIRE(log.status == 200);
    CHECK(log.body.at("total") == 1);
    CHECK(log.body.at("records").at(0).at("kind") == "Dimension");
}

TEST_CASE("validation errors map to 400 with the error kind", "[api]") {
    ControlService svc(service_config());
    auto bad = json::parse(kRequest);
    bad["regions"][0]["q_min"] = 5;
    const auto r = svc.create_slice(bad.dump());
    CHECK(r.status == 400);
    CHECK(r.body.at("error") == "InvalidQoeTarget");

    CHECK(svc.create_slice("{not json").status == 400);
    CHECK(svc.create_slice("[]").status == 400);
    auto unknown = json::parse(kRequest);
    unknown["colour"] = "blue";
    CHECK(svc.create_slice(unknown.dump()).status == 400);
    auto empty = json::parse(kRequest);
    empty["regions"] = json::array();
    CHECK(svc.create_slice(empty.dump()).status == 400);
}

TEST_CASE("capacity shortfall is a conflict", "[api]") {
    ControlService svc(service_config());
    auto big = json::parse(kRequest);
    big["regions"][0]["max_streams"] = 1000000; // far beyond the 16 vCPUs of edge-a
    const auto r = svc.create_slice(big.dump());
    CHECK(r.status == 409);
    CHECK(r.body.at("error") == "CapacityError");
}

TEST_CASE("unknown slices are 404", "[api]") {
    ControlService svc(service_config());
    CHECK(svc.get_slice("nope").status == 404);
    CHECK(svc.get_decisions("nope").status == 404);
    CHECK(svc.delete_slice("nope").status == 404);
    CHECK(svc.observe("nope", R"({"t": 1})").status == 404);
}

TEST_CASE("delete removes the slice", "[api]") {
    ControlService svc(service_config());
    const std::string id = svc.create_slice(kRequest).body.at("slice_id");
    CHECK(svc.delete_slice(id).status == 200);
    CHECK(svc.get_slice(id).status == 404);
    CHECK(svc.delete_slice(id).status == 404);
    CHECK(svc.slice_ids().empty());
}

TEST_CASE("live load step through observe produces the scale-up record", "[api]") {
    ControlService svc(service_config());
    const std::string id = svc.create_slice(kRequest).body.at("slice_id");
    CHECK(svc.observe(id, R"({"t": 60, "sessions": {"north": 4000}})").status == 200);
    CHECK(svc.observe(id, R"({"t": 120, "sessions": {"north": 4000}})").status == 200);
    const auto step = svc.observe(id, R"({"t": 180, "sessions": {"north": 8000}})");
    REQUIRE(step.status == 200);
    REQUIRE(step.body.at("triggers").size() == 1);
    CHECK(step.body.at("triggers").at(0).at("verdict") == "ScaleUpHint");
    CHECK(step.body.at("triggers").at(0).at("decision") == "Reallocate");

    const auto log = svc.get_decisions(id);
    bool found = false;
    for (const auto& rec : log.body.at("records"))
        if (rec.at("kind") == "Reallocate" && rec.at("t") == 180.0) {
            found = true;
            CHECK(rec.at("trace").at(0).at("detail") == "ScaleUpHint");
        }
    CHECK(found);

    // changeover completes boot_delay + drain_sleep later
    CHECK(svc.observe(id, R"({"t": 198, "sessions": {"north": 8000}})").status == 200);
    const auto after = svc.get_slice(id).body;
    int active = 0;
    for (const auto& inst : after.at("instances"))
        if (inst.at("phase") == "Active") {
            ++active;
            CHECK(inst.at("flavor") == "a.medium");
        }
    CHECK(active == 1);

    CHECK(svc.observe(id, R"({"t": 100})").status == 400);
    CHECK(svc.observe(id, R"({"t": 200, "sessions": {"south": 1}})").status == 400);
    CHECK(svc.observe(id, R"({"sessions": {}})").status == 400);
}

TEST_CASE("a second mutation while one is in flight gets 409", "[api]") {
    ControlService svc(service_config());
    const std::string id = svc.create_slice(kRequest).body.at("slice_id");
    std::promise<void> entered, release;
    auto held = std::async(std::launch::async, [&] {
        return svc.mutate(id, [&](auto&) {
            entered.set_value();
            release.get_future().wait();
            return ApiResponse{200, {}};
        });
    });
    entered.get_future().wait();
    CHECK(svc.delete_slice(id).status == 409);
    CHECK(svc.observe(id, R"({"t": 5})").status == 409);
    release.set_value();
    CHECK(held.get().status == 200);
    CHECK(svc.delete_slice(id).status == 200);
}

TEST_CASE("HTTP round trip", "[api][http]") {
    ControlService svc(service_config());
    ControlServer server(svc);
    const int port = server.start("127.0.0.1", 0);
    REQUIRE(port > 0);
    httplib::Client cli("127.0.0.1", port);

    auto post = cli.Post("/slices", kRequest, "application/json");
    REQUIRE(post);
    CHECK(post->status == 201);
    const std::string id = json::parse(post->body).at("slice_id");

    auto get = cli.Get("/slices/" + id);
    REQUIRE(get);
    CHECK(get->status == 200);
    CHECK(json::parse(get->body).at("regions").at(0).at("region_id") == "north");

    auto page = cli.Get("/slices/" + id + "/decisions?offset=0&limit=1");
    REQUIRE(page);
    CHECK(page->status == 200);
    CHECK(json::parse(page->body).at("records").size() == 1);
    auto badpage = cli.Get("/slices/" + id + "/decisions?limit=x");
    REQUIRE(badpage);
    CHECK(badpage->status == 400);

    auto obs = cli.Post("/slices/" + id + "/observe", R"({"t": 60, "sessions": {"north": 100}})", "application/json");
    REQUIRE(obs);
    CHECK(obs->status == 200);

    auto bad = cli.Post("/slices", R"({"regions": [{"region_id": "x", "max_streams": 10, "q_min": 5}]})",
                        "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);
    CHECK(json::parse(bad->body).at("error") == "InvalidQoeTarget");

    auto del = cli.Delete("/slices/" + id);
    REQUIRE(del);
    CHECK(del->status == 200);
    auto gone = cli.Get("/slices/" + id);
    REQUIRE(gone);
    CHECK(gone->status == 404);
    server.stop();
}
