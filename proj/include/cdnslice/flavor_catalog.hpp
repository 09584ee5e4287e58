#pragma once

// Multi-cloud flavor catalog: loading, validation, per-cloud cost
// normalization, synthetic generation and capacity accounting.

#include "cdnslice/errors.hpp"
#include "cdnslice/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

namespace cdnslice {

struct Flavor {
    std::string id;
    std::string cloud_id;
    int vcpu = 1;
    std::int64_t ram_mb = 1;
    double cost_per_hour = 0.0;

    bool operator==(const Flavor&) const = default;
};

/// A cloud domain and the contiguous span [first, last] of its flavors in
/// the global flavor vector. Spans are derived from file order on load.
struct CloudDomain {
    std::string id;
    std::string name;
    int capacity_vcpus = 0;
    std::size_t first = 0;
    std::size_t last = 0;

    std::size_t size() const noexcept { return last - first + 1; }
    bool operator==(const CloudDomain&) const = default;
};

/// Input shape for building a catalog: one cloud and its flavors in order.
struct CloudSpec {
    std::string id;
    std::string name;
    int capacity_vcpus = 0;
    std::vector<Flavor> flavors; // cloud_id may be left empty
};

class Catalog {
public:
    Catalog() = default;

    explicit Catalog(std::vector<CloudSpec> specs) {
        if (specs.empty()) throw ValidationError("catalog has no clouds");
        std::unordered_map<std::string, bool> cloud_ids;
        for (auto& spec : specs) {
            if (spec.id.empty()) throw ValidationError("cloud with empty id");
            if (!cloud_ids.emplace(spec.id, true).second)
                throw ValidationError("duplicate cloud id '" + spec.id + "'");
            if (spec.capacity_vcpus < 0)
                throw ValidationError("cloud '" + spec.id + "' has negative capacity");
            if (spec.flavors.empty()) throw ValidationError("cloud '" + spec.id + "' has no flavors");

            CloudDomain cloud{spec.id, spec.name, spec.capacity_vcpus, flavors_.size(),
                              flavors_.size() + spec.flavors.size() - 1};
            double lo = spec.flavors.front().cost_per_hour;
            double hi = lo;
            for (auto& f : spec.flavors) {
                if (f.cloud_id.empty()) f.cloud_id = spec.id;
                if (f.cloud_id != spec.id)
                    throw ValidationError("flavor '" + f.id + "' declares cloud '" + f.cloud_id +
                                          "' but is listed under '" + spec.id + "'");
                if (f.id.empty()) throw ValidationError("flavor with empty id in cloud '" + spec.id + "'");
                if (f.vcpu < 1) throw ValidationError("flavor '" + f.id + "' has vcpu < 1");
                if (f.ram_mb < 1) throw ValidationError("flavor '" + f.id + "' has ram_mb < 1");
                if (!(f.cost_per_hour > 0.0) || !std::isfinite(f.cost_per_hour))
                    throw ValidationError("flavor '" + f.id + "' must have a positive cost");
                if (!index_.emplace(f.id, flavors_.size()).second)
                    throw ValidationError("duplicate flavor id '" + f.id + "'");
                lo = std::min(lo, f.cost_per_hour);
                hi = std::max(hi, f.cost_per_hour);
                cloud_of_.push_back(clouds_.size());
                flavors_.push_back(std::move(f));
            }
            cost_range_.push_back({lo, hi});
            cloud_index_.emplace(cloud.id, clouds_.size());
            clouds_.push_back(std::move(cloud));
        }
    }

    const std::vector<CloudDomain>& clouds() const noexcept { return clouds_; }
    const std::vector<Flavor>& flavors() const noexcept { return flavors_; }
    const Flavor& flavor(std::size_t j) const { return flavors_.at(j); }
    const CloudDomain& cloud(std::size_t k) const { return clouds_.at(k); }
    std::size_t cloud_index_of_flavor(std::size_t j) const { return cloud_of_.at(j); }

    std::optional<std::size_t> find_flavor(const std::string& id) const {
        auto it = index_.find(id);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    std::size_t flavor_index(const std::string& id) const {
        auto idx = find_flavor(id);
        if (!idx) throw UnknownFlavor(id);
        return *idx;
    }

    std::optional<std::size_t> find_cloud(const std::string& id) const {
        auto it = cloud_index_.find(id);
        if (it == cloud_index_.end()) return std::nullopt;
        return it->second;
    }

    /// Min-max normalized cost of flavor j within its own cloud.
    double eta(std::size_t j) const {
        const auto [lo, hi] = cost_range_.at(cloud_of_.at(j));
        if (!(hi > lo)) return 0.0;
        return (flavors_[j].cost_per_hour - lo) / (hi - lo);
    }

    std::pair<double, double> cost_range(std::size_t cloud) const { return cost_range_.at(cloud); }

    std::int64_t total_capacity() const noexcept {
        std::int64_t total = 0;
        for (const auto& c : clouds_) total += c.capacity_vcpus;
        return total;
    }

    bool operator==(const Catalog& other) const {
        return clouds_ == other.clouds_ && flavors_ == other.flavors_;
    }

private:
    std::vector<CloudDomain> clouds_;
    std::vector<Flavor> flavors_;
    std::vector<std::size_t> cloud_of_;
    std::vector<std::pair<double, double>> cost_range_;
    std::unordered_map<std::string, std::size_t> index_;
    std::unordered_map<std::string, std::size_t> cloud_index_;
};

/// Normalized cost of `flavor` among the flavors of `cloud`; 0 for a cloud
/// with a single distinct price.
inline double normalized_cost(const Flavor& flavor, const CloudDomain& cloud, const Catalog& catalog) {
    if (flavor.cloud_id != cloud.id)
        throw ValidationError("flavor '" + flavor.id + "' does not belong to cloud '" + cloud.id + "'");
    double lo = catalog.flavor(cloud.first).cost_per_hour;
    double hi = lo;
    for (std::size_t j = cloud.first; j <= cloud.last; ++j) {
        lo = std::min(lo, catalog.flavor(j).cost_per_hour);
        hi = std::max(hi, catalog.flavor(j).cost_per_hour);
    }
    if (!(hi > lo)) return 0.0;
    return (flavor.cost_per_hour - lo) / (hi - lo);
}

// ---------------------------------------------------------------------------
// JSON file format

struct CatalogLoadOptions {
    bool strict = false;
    std::function<void(const std::string&)> warn = [](const std::string& msg) {
        std::cerr << "catalog: " << msg << '\n';
    };
};

namespace detail {

inline void check_fields(const nlohmann::json& obj, std::initializer_list<const char*> known,
                         const std::string& where, const CatalogLoadOptions& opts) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : known) ok = ok || it.key() == k;
        if (ok) continue;
        const std::string msg = "unknown field '" + it.key() + "' in " + where;
        if (opts.strict) throw ValidationError(msg);
        if (opts.warn) opts.warn(msg);
    }
}

template <typename T>
T required(const nlohmann::json& obj, const char* key, const std::string& where) {
    auto it = obj.find(key);
    if (it == obj.end()) throw ParseError(std::string("missing field '") + key + "' in " + where);
    try {
        return it->get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad field '") + key + "' in " + where + ": " + e.what());
    }
}

} // namespace detail

inline Catalog parse_catalog(const nlohmann::json& doc, const CatalogLoadOptions& opts = {}) {
    if (!doc.is_object()) throw ParseError("catalog document must be a JSON object");
    detail::check_fields(doc, {"clouds"}, "catalog", opts);
    auto clouds_it = doc.find("clouds");
    if (clouds_it == doc.end() || !clouds_it->is_array()) throw ParseError("catalog needs a 'clouds' array");

    std::vector<CloudSpec> specs;
    for (const auto& c : *clouds_it) {
        if (!c.is_object()) throw ParseError("cloud entry must be an object");
        CloudSpec spec;
        spec.id = detail::required<std::string>(c, "id", "cloud");
        const std::string where = "cloud '" + spec.id + "'";
        detail::check_fields(c, {"id", "name", "capacity_vcpus", "flavors"}, where, opts);
        spec.name = detail::required<std::string>(c, "name", where);
        spec.capacity_vcpus = detail::required<int>(c, "capacity_vcpus", where);
        auto fl = c.find("flavors");
        if (fl == c.end() || !fl->is_array()) throw ParseError(where + " needs a 'flavors' array");
        for (const auto& f : *fl) {
            if (!f.is_object()) throw ParseError("flavor entry must be an object in " + where);
            Flavor flavor;
            flavor.id = detail::required<std::string>(f, "id", where);
            const std::string fwhere = "flavor '" + flavor.id + "'";
            detail::check_fields(f, {"id", "vcpu", "ram_mb", "cost_per_hour"}, fwhere, opts);
            flavor.cloud_id = spec.id;
            flavor.vcpu = detail::required<int>(f, "vcpu", fwhere);
            flavor.ram_mb = detail::required<std::int64_t>(f, "ram_mb", fwhere);
            flavor.cost_per_hour = detail::required<double>(f, "cost_per_hour", fwhere);
            spec.flavors.push_back(std::move(flavor));
        }
        specs.push_back(std::move(spec));
    }
    return Catalog(std::move(specs));
}

inline Catalog load_catalog(const std::string& path, const CatalogLoadOptions& opts = {}) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open catalog file '" + path + "'");
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("malformed catalog '" + path + "': " + e.what());
    }
    return parse_catalog(doc, opts);
}

inline nlohmann::json catalog_to_json(const Catalog& catalog) {
    nlohmann::json clouds = nlohmann::json::array();
    for (const auto& cloud : catalog.clouds()) {
        nlohmann::json flavors = nlohmann::json::array();
        for (std::size_t j = cloud.first; j <= cloud.last; ++j) {
            const auto& f = catalog.flavor(j);
            flavors.push_back({{"id", f.id}, {"vcpu", f.vcpu}, {"ram_mb", f.ram_mb}, {"cost_per_hour", f.cost_per_hour}});
        }
        clouds.push_back({{"id", cloud.id},
                          {"name", cloud.name},
                          {"capacity_vcpus", cloud.capacity_vcpus},
                          {"flavors", std::move(flavors)}});
    }
    return {{"clouds", std::move(clouds)}};
}

inline void save_catalog(const Catalog& catalog, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write catalog file '" + path + "'");
    out << catalog_to_json(catalog).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Synthetic catalogs

struct PriceModel {
    double base_per_vcpu_hour = 0.04;
    double cloud_multiplier_min = 0.6;
    double cloud_multiplier_max = 2.4;
    /// Price premium per RAM tier (RAM doubles per tier). Must keep
    /// 1 + ram_tier_premium * (tiers - 1) + jitter < 2 so that price strictly
    /// increases with vcpu inside a cloud.
    double ram_tier_premium = 0.18;
    double jitter = 0.05;
    double price_step = 1e-4; // $/h rounding grain
};

struct SyntheticCatalogParams {
    std::uint64_t seed = 42;
    int n_clouds = 45;
    int total_flavors = 1417;
    int capacity_vcpus = 20;
    std::array<int, 6> vcpu_choices{1, 2, 4, 8, 16, 32};
    std::array<double, 6> vcpu_weights{0.30, 0.26, 0.20, 0.12, 0.08, 0.04};
    int ram_tiers = 5; // ram_mb = vcpu * 512 * 2^tier
    PriceModel price;
};

inline Catalog generate_synthetic_catalog(const SyntheticCatalogParams& p) {
    if (p.n_clouds < 1) throw ValidationError("n_clouds must be >= 1");
    if (p.total_flavors < p.n_clouds) throw ValidationError("need at least one flavor per cloud");
    if (p.ram_tiers < 1 || 1.0 + p.price.ram_tier_premium * (p.ram_tiers - 1) + p.price.jitter >= 2.0)
        throw ValidationError("price model would break vcpu price ordering");

    Rng rng(derive_seed(p.seed, 0));

    // Split the flavor total across clouds: one each, the rest by random weight
    // with largest-remainder rounding.
    std::vector<double> weight(p.n_clouds);
    double wsum = 0.0;
    for (auto& w : weight) wsum += (w = 0.5 + uniform01(rng));
    const int spare = p.total_flavors - p.n_clouds;
    std::vector<int> count(p.n_clouds, 1);
    std::vector<std::pair<double, int>> remainders;
    int assigned = 0;
    for (int k = 0; k < p.n_clouds; ++k) {
        const double exact = spare * weight[k] / wsum;
        const int whole = static_cast<int>(std::floor(exact));
        count[k] += whole;
        assigned += whole;
        remainders.push_back({exact - whole, k});
    }
    std::sort(remainders.begin(), remainders.end(),
              [](const auto& a, const auto& b) { return a.first != b.first ? a.first > b.first : a.second < b.second; });
    for (int i = 0; i < spare - assigned; ++i) ++count[remainders[i].second];

    std::vector<CloudSpec> specs;
    for (int k = 0; k < p.n_clouds; ++k) {
        Rng crng(derive_seed(p.seed, 1000 + k));
        char cid[32];
        std::snprintf(cid, sizeof cid, "cloud-%02d", k);
        CloudSpec spec{cid, std::string("Synthetic cloud ") + (cid + 6), p.capacity_vcpus, {}};
        const double mult = uniform_real(crng, p.price.cloud_multiplier_min, p.price.cloud_multiplier_max);

        struct Draw {
            int vcpu;
            int tier;
            double cost;
        };
        std::vector<Draw> draws;
        for (int i = 0; i < count[k]; ++i) {
            const int vcpu = p.vcpu_choices[weighted_index(crng, p.vcpu_weights)];
            const int tier = static_cast<int>(uniform_int(crng, 0, p.ram_tiers - 1));
            const double factor = 1.0 + p.price.ram_tier_premium * tier + p.price.jitter * uniform01(crng);
            double cost = mult * p.price.base_per_vcpu_hour * vcpu * factor;
            cost = std::max(p.price.price_step, std::round(cost / p.price.price_step) * p.price.price_step);
            draws.push_back({vcpu, tier, cost});
        }
        std::sort(draws.begin(), draws.end(), [](const Draw& a, const Draw& b) {
            if (a.vcpu != b.vcpu) return a.vcpu < b.vcpu;
            if (a.tier != b.tier) return a.tier < b.tier;
            return a.cost < b.cost;
        });
        for (std::size_t i = 0; i < draws.size(); ++i) {
            char fid[64];
            std::snprintf(fid, sizeof fid, "%s-f%03zu", cid, i);
            spec.flavors.push_back(
                {fid, cid, draws[i].vcpu, static_cast<std::int64_t>(draws[i].vcpu) * (512LL << draws[i].tier), draws[i].cost});
        }
        specs.push_back(std::move(spec));
    }
    return Catalog(std::move(specs));
}

// ---------------------------------------------------------------------------
// Capacity

/// vCPUs still free in `cloud` once the assigned flavors (by id) are placed.
/// Negative when the assignment over-commits the cloud.
template <typename FlavorIdRange>
std::int64_t remaining_capacity(const CloudDomain& cloud, const Catalog& catalog, const FlavorIdRange& flavor_ids) {
    std::int64_t used = 0;
    for (const auto& id : flavor_ids) {
        const auto& f = catalog.flavor(catalog.flavor_index(id));
        if (f.cloud_id == cloud.id) used += f.vcpu;
    }
    return cloud.capacity_vcpus - used;
}

} // namespace cdnslice
