#pragma once

// JSON-over-HTTP control surface for live slices. ControlService holds the
// state and is transport-free; ControlServer binds it to httplib.

#include "cdnslice/scenario.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <thread>

namespace cdnslice {

struct ApiResponse {
    int status = 200;
    nlohmann::json body;
};

struct ServiceConfig {
    Catalog catalog;
    ChangeoverTiming timing;
    TelemetryModel telemetry;
    EdmOptions solver;

    static ServiceConfig from_scenario(const ScenarioConfig& c) {
        return {*c.catalog, c.timing, c.telemetry, c.solver};
    }
};

inline const char* error_name(const std::exception& e) {
    if (dynamic_cast<const InvalidQoeTarget*>(&e)) return "InvalidQoeTarget";
    if (dynamic_cast<const ValidationError*>(&e)) return "ValidationError";
    if (dynamic_cast<const ConfigError*>(&e)) return "ConfigError";
    if (dynamic_cast<const ParseError*>(&e)) return "ParseError";
    if (dynamic_cast<const CapacityError*>(&e)) return "CapacityError";
    if (dynamic_cast<const UnknownFlavor*>(&e)) return "UnknownFlavor";
    if (dynamic_cast<const OutOfRange*>(&e)) return "OutOfRange";
    if (dynamic_cast<const StaleDecision*>(&e)) return "StaleDecision";
    return "Error";
}

inline nlohmann::json slice_request_to_json(const SliceRequest& r) {
    nlohmann::json regions = nlohmann::json::array();
    for (const auto& x : r.regions)
        regions.push_back({{"region_id", x.region_id}, {"max_streams", x.max_streams}, {"q_min", x.q_min},
                           {"cloud_id", x.cloud_id}});
    const auto& t = r.thresholds;
    return {{"customer_id", r.customer_id},
            {"duration_hours", r.duration_hours},
            {"monitoring_period_s", r.monitoring_period_s},
            {"sigma", r.sigma},
            {"thresholds",
             {{"l_min", t.l_min}, {"l_max", t.l_max}, {"cpu_up", t.cpu_up}, {"ram_up", t.ram_up},
              {"cpu_down", t.cpu_down}, {"ram_down", t.ram_down}}},
            {"regions", regions}};
}

inline nlohmann::json metrics_to_json(const RegionMetrics& m) {
    return {{"region_id", m.region_id},   {"instances", m.instances},   {"booting", m.booting},
            {"draining", m.draining},     {"vcpus", m.vcpus},           {"cost_usd_h", m.cost_usd_h},
            {"accrued_cost", m.accrued_cost}, {"mos_mean", m.mos_mean}, {"load_mean", m.load_mean},
            {"sessions", m.sessions}};
}

inline nlohmann::json decision_to_json(const DecisionRecord& d) {
    nlohmann::json trace = nlohmann::json::array();
    for (const auto& e : d.trace) trace.push_back({{"step", e.step}, {"detail", e.detail}});
    return {{"t", d.t},       {"epoch", d.epoch},     {"region_id", d.region_id},
            {"kind", d.kind}, {"summary", d.summary}, {"trace", trace}};
}

class ControlService {
public:
    explicit ControlService(ServiceConfig cfg) : cfg_(std::move(cfg)) {}

    ControlService(const ControlService&) = delete;
    ControlService& operator=(const ControlService&) = delete;

    /// POST /slices. Body: slice request, optionally with "t" (creation time).
    ApiResponse create_slice(const std::string& body) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(body);
        } catch (const nlohmann::json::parse_error& e) {
            return error(400, "ParseError", e.what());
        }
        if (!j.is_object()) return error(400, "ValidationError", "request body must be an object");
        double t = 0.0;
        if (j.contains("t")) {
            if (!j.at("t").is_number()) return error(400, "ValidationError", "t must be a number");
            t = j.at("t").get<double>();
            j.erase("t");
        }
        auto entry = std::make_shared<Entry>();
        std::string id;
        try {
            auto request = detail::parse_slice(j);
            {
                std::lock_guard lock(map_mu_);
                char buf[32];
                std::snprintf(buf, sizeof buf, "slice-%04d", ++counter_);
                id = buf;
            }
            entry->slice = std::make_unique<SliceState>(id, std::move(request), cfg_.catalog, cfg_.timing, t);
        } catch (const CapacityError& e) {
            return error(409, "CapacityError", e.what());
        } catch (const Error& e) {
            return error(400, error_name(e), e.what());
        } catch (const nlohmann::json::exception& e) {
            return error(400, "ValidationError", e.what());
        }
        nlohmann::json snapshot = describe(*entry->slice);
        {
            std::lock_guard lock(map_mu_);
            slices_[id] = entry;
        }
        return {201, snapshot};
    }

    /// GET /slices/{id}
    ApiResponse get_slice(const std::string& id) const {
        auto entry = find(id);
        if (!entry) return not_found(id);
        std::shared_lock lock(entry->mu);
        if (!entry->slice) return not_found(id);
        return {200, describe(*entry->slice)};
    }

    /// GET /slices/{id}/decisions?offset=&limit=
    ApiResponse get_decisions(const std::string& id, std::size_t offset = 0, std::size_t limit = 100) const {
        auto entry = find(id);
        if (!entry) return not_found(id);
        std::shared_lock lock(entry->mu);
        if (!entry->slice) return not_found(id);
        const auto& log = entry->slice->log();
        nlohmann::json records = nlohmann::json::array();
        for (std::size_t i = offset; i < log.size() && i < offset + limit; ++i) records.push_back(decision_to_json(log[i]));
        return {200, {{"slice_id", id}, {"total", log.size()}, {"offset", offset}, {"records", records}}};
    }

    /// DELETE /slices/{id}
    ApiResponse delete_slice(const std::string& id) {
        return mutate(id, [&](Entry& e) -> ApiResponse {
            const double cost = e.slice->accrued_cost();
            e.slice.reset();
            std::lock_guard lock(map_mu_);
            slices_.erase(id);
            return {200, {{"slice_id", id}, {"deleted", true}, {"accrued_cost", cost}}};
        });
    }

    /// POST /slices/{id}/observe. Body: {"t": seconds, "sessions": {region: count}}.
    /// Advances the slice to t, routes the observed sessions and runs one
    /// monitoring period.
    ApiResponse observe(const std::string& id, const std::string& body) {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(body);
        } catch (const nlohmann::json::parse_error& e) {
            return error(400, "ParseError", e.what());
        }
        if (!j.is_object() || !j.contains("t") || !j.at("t").is_number())
            return error(400, "ValidationError", "observe needs a numeric t");
        return mutate(id, [&](Entry& e) -> ApiResponse {
            auto& s = *e.slice;
            const double t = j.at("t").get<double>();
            if (t < s.clock()) return error(400, "ValidationError", "t precedes the slice clock");
            std::map<std::string, double> sessions;
            if (j.contains("sessions")) {
                const auto& sj = j.at("sessions");
                if (!sj.is_object()) return error(400, "ValidationError", "sessions must be an object");
                const auto ids = s.region_ids();
                for (auto it = sj.begin(); it != sj.end(); ++it) {
                    if (std::find(ids.begin(), ids.end(), it.key()) == ids.end())
                        return error(400, "ValidationError", "unknown region '" + it.key() + "'");
                    if (!it->is_number() || it->get<double>() < 0.0)
                        return error(400, "ValidationError", "session count for '" + it.key() + "' must be >= 0");
                    sessions[it.key()] = it->get<double>();
                }
            }
            try {
                s.advance_to(t);
                for (const auto& [rid, n] : sessions) s.route(rid, s.dormant(rid) ? 0.0 : n);
                const auto sample = collect_telemetry(s, cfg_.catalog, cfg_.telemetry, s.request().sigma, t);
                const auto triggers = monitoring_step(s, cfg_.catalog, sample, cfg_.solver, t);
                nlohmann::json tj = nlohmann::json::array();
                for (const auto& tr : triggers)
                    tj.push_back({{"t", tr.t},
                                  {"region_id", tr.region_id},
                                  {"verdict", to_string(tr.verdict)},
                                  {"decision", tr.decision}});
                return {200, {{"slice_id", id}, {"t", t}, {"triggers", tj}, {"slice", describe(s)}}};
            } catch (const Error& ex) {
                return error(400, error_name(ex), ex.what());
            }
        });
    }

    std::vector<std::string> slice_ids() const {
        std::lock_guard lock(map_mu_);
        std::vector<std::string> out;
        for (const auto& [id, e] : slices_) out.push_back(id);
        return out;
    }

    /// Runs `fn` with exclusive access to the slice. A second mutation while
    /// one is in flight gets 409.
    template <typename F>
    ApiResponse mutate(const std::string& id, F&& fn) {
        auto entry = find(id);
        if (!entry) return not_found(id);
        std::unique_lock lock(entry->mu, std::try_to_lock);
        if (!lock.owns_lock()) return error(409, "Conflict", "another command is in flight for " + id);
        if (!entry->slice) return not_found(id);
        return fn(*entry);
    }

    const ServiceConfig& config() const noexcept { return cfg_; }

private:
    struct Entry {
        mutable std::shared_mutex mu;
        std::unique_ptr<SliceState> slice;
    };

    std::shared_ptr<Entry> find(const std::string& id) const {
        std::lock_guard lock(map_mu_);
        const auto it = slices_.find(id);
        return it == slices_.end() ? nullptr : it->second;
    }

    nlohmann::json describe(const SliceState& s) const {
        nlohmann::json regions = nlohmann::json::array();
        for (const auto& m : s.snapshot_metrics()) {
            auto r = metrics_to_json(m);
            r["epoch"] = s.epoch(m.region_id);
            r["dormant"] = s.dormant(m.region_id);
            regions.push_back(r);
        }
        nlohmann::json plans = nlohmann::json::array();
        for (const auto& p : s.plans())
            plans.push_back({{"region_id", p.region_id},
                             {"vcpus", p.vcpus},
                             {"streams_per_vcpu", p.streams_per_vcpu},
                             {"cloud_id", p.cloud_id},
                             {"flavors", p.flavors},
                             {"cost_per_hour", p.cost_per_hour}});
        nlohmann::json instances = nlohmann::json::array();
        for (const auto& [iid, inst] : s.instances())
            instances.push_back({{"instance_id", iid},
                                 {"region_id", inst.region_id},
                                 {"flavor", inst.snap.current_flavor},
                                 {"cloud_id", inst.snap.cloud_id},
                                 {"phase", to_string(inst.phase)},
                                 {"sessions", inst.snap.sessions},
                                 {"cpu_pct", inst.cpu_pct},
                                 {"ram_pct", inst.ram_pct}});
        return {{"slice_id", s.id()},
                {"clock", s.clock()},
                {"accrued_cost", s.accrued_cost()},
                {"request", slice_request_to_json(s.request())},
                {"dimensioning", plans},
                {"regions", regions},
                {"instances", instances}};
    }

    static ApiResponse error(int status, const std::string& kind, const std::string& message) {
        return {status, {{"error", kind}, {"message", message}}};
    }
    static ApiResponse not_found(const std::string& id) { return error(404, "NotFound", "no slice '" + id + "'"); }

    ServiceConfig cfg_;
    mutable std::mutex map_mu_;
    std::map<std::string, std::shared_ptr<Entry>> slices_;
    int counter_ = 0;
};

/// httplib binding for ControlService.
class ControlServer {
public:
    explicit ControlServer(ControlService& svc) : svc_(svc) {
        using httplib::Request;
        using httplib::Response;
        auto reply = [](Response& res, const ApiResponse& a) {
            res.status = a.status;
            res.set_content(a.body.dump(), "application/json");
        };
        srv_.Post("/slices", [this, reply](const Request& req, Response& res) { reply(res, svc_.create_slice(req.body)); });
        srv_.Get("/slices", [this, reply](const Request&, Response& res) {
            reply(res, {200, {{"slices", svc_.slice_ids()}}});
        });
        srv_.Get(R"(/slices/([^/]+))", [this, reply](const Request& req, Response& res) {
            reply(res, svc_.get_slice(req.matches[1]));
        });
        srv_.Get(R"(/slices/([^/]+)/decisions)", [this, reply](const Request& req, Response& res) {
            std::size_t offset = 0, limit = 100;
            try {
                if (req.has_param("offset")) offset = std::stoul(req.get_param_value("offset"));
                if (req.has_param("limit")) limit = std::stoul(req.get_param_value("limit"));
            } catch (const std::exception&) {
                reply(res, {400, {{"error", "ValidationError"}, {"message", "offset and limit must be integers"}}});
                return;
            }
            reply(res, svc_.get_decisions(req.matches[1], offset, limit));
        });
        srv_.Post(R"(/slices/([^/]+)/observe)", [this, reply](const Request& req, Response& res) {
            reply(res, svc_.observe(req.matches[1], req.body));
        });
        srv_.Delete(R"(/slices/([^/]+))", [this, reply](const Request& req, Response& res) {
            reply(res, svc_.delete_slice(req.matches[1]));
        });
    }

    ~ControlServer() { stop(); }

    /// Binds and serves on a background thread; port 0 picks a free port.
    int start(const std::string& host, int port) {
        const int bound = port == 0 ? srv_.bind_to_any_port(host) : (srv_.bind_to_port(host, port) ? port : -1);
        if (bound < 0) throw ResourceUnavailable("cannot bind " + host + ":" + std::to_string(port));
        thread_ = std::thread([this] { srv_.listen_after_bind(); });
        srv_.wait_until_ready();
        return bound;
    }

    /// Serves on the calling thread until stopped.
    bool listen(const std::string& host, int port) { return srv_.listen(host, port); }

    void stop() {
        srv_.stop();
        if (thread_.joinable()) thread_.join();
    }

private:
    ControlService& svc_;
    httplib::Server srv_;
    std::thread thread_;
};

} // namespace cdnslice
