#include <cstdlib>
#include <thread>

#include "httplib.h"
#include "kgprune/error.hpp"
#include "kgprune/ingest.hpp"

namespace kgp {
namespace {

struct SplitUrl {
    std::string origin;   // scheme://host[:port]
    std::string path;     // starts with '/'
};

SplitUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) fail(ErrorKind::ValidationError, "URL without scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

std::string strip_trailing_slash(std::string s) {
    while (!s.empty() && s.back() == '/') s.pop_back();
    return s;
}

std::optional<std::string> env(const char* name) {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
}

}  // namespace

EndpointConfig EndpointConfig::from_env() {
    EndpointConfig c;
    if (auto v = env("KGP_ENDPOINT")) c.base_url = *v;
    if (auto v = env("KGP_SPARQL_ENDPOINT")) c.sparql_url = *v;
    if (auto v = env("KGP_RPS_CAP")) {
        char* end = nullptr;
        c.requests_per_second = std::strtod(v->c_str(), &end);
        if (end == v->c_str() || *end) fail(ErrorKind::ValidationError, "KGP_RPS_CAP is not a number: " + *v);
    }
    c.check();
    return c;
}

void EndpointConfig::check() const {
    if (!(requests_per_second > 0)) fail(ErrorKind::ValidationError, "requests-per-second cap must be positive");
    if (retry_limit > 10) fail(ErrorKind::ValidationError, "retry limit must be at most 10");
    if (timeout.count() <= 0) fail(ErrorKind::ValidationError, "timeout must be positive");
    split_url(base_url);
    split_url(sparql_url);
}

RateLimiter::RateLimiter(double requests_per_second)
    : interval_(std::chrono::duration_cast<std::chrono::steady_clock::duration>(
          std::chrono::duration<double>(1.0 / requests_per_second))) {}

void RateLimiter::acquire() {
    std::chrono::steady_clock::time_point slot;
    {
        std::lock_guard lock(mutex_);
        slot = std::max(std::chrono::steady_clock::now(), next_);
        next_ = slot + interval_;
    }
    std::this_thread::sleep_until(slot);
}

WikidataClient::WikidataClient(EndpointConfig config, FragmentCache* cache)
    : config_(std::move(config)), cache_(cache), limiter_((config_.check(), config_.requests_per_second)) {}

std::size_t WikidataClient::requests_made() const noexcept {
    std::lock_guard lock(stats_mutex_);
    return requests_;
}

std::string WikidataClient::get(const std::string& url, bool* not_found) {
    const SplitUrl target = split_url(url);
    httplib::Client http(target.origin);
    http.set_follow_location(true);
    http.set_connection_timeout(config_.timeout);
    http.set_read_timeout(config_.timeout);
    const httplib::Headers headers{{"User-Agent", config_.user_agent},
                                   {"Accept", "application/json, application/sparql-results+json"}};

    std::string last_problem;
    bool throttled = false;
    auto delay = config_.backoff;
    for (unsigned attempt = 0; attempt <= config_.retry_limit; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(delay);
            delay *= 2;
        }
        limiter_.acquire();
        {
            std::lock_guard lock(stats_mutex_);
            ++requests_;
        }
        const auto res = http.Get(target.path, headers);
        if (!res) {
            throttled = false;
            last_problem = "connection failed (" + httplib::to_string(res.error()) + ")";
            continue;
        }
        if (res->status == 200) return res->body;
        if (res->status == 404) {
            *not_found = true;
            return {};
        }
        if (res->status == 429) {
            throttled = true;
            last_problem = "throttled (HTTP 429)";
            if (res->has_header("Retry-After")) {
                const auto seconds = std::atoi(res->get_header_value("Retry-After").c_str());
                if (seconds > 0) delay = std::max(delay, std::chrono::milliseconds(std::min(seconds, 60) * 1000));
            }
            continue;
        }
        throttled = false;
        last_problem = "HTTP " + std::to_string(res->status);
        if (res->status < 500) break;   // a client error will not improve with retries
    }
    fail(throttled ? ErrorKind::QueryRefused : ErrorKind::TransportError,
         "GET " + url + ": " + last_problem + " after " + std::to_string(config_.retry_limit + 1) +
             " attempt(s)");
}

EntityFragment WikidataClient::fetch_entity(EntityId id) {
    if (cache_) {
        if (auto hit = cache_->get(id)) return std::move(*hit);
    }
    const std::string url =
        strip_trailing_slash(config_.base_url) + "/wiki/Special:EntityData/" + to_string(id) + ".json";
    bool not_found = false;
    const std::string body = get(url, &not_found);
    if (not_found) fail(ErrorKind::NotFound, to_string(id) + " does not exist at " + config_.base_url);
    EntityFragment fragment = parse_entity_document(body, id);
    if (cache_) cache_->put(fragment);
    return fragment;
}

InverseNeighbors WikidataClient::fetch_inverse_neighbors(EntityId object, std::uint64_t property,
                                                         std::size_t cap) {
    if (cap == 0) fail(ErrorKind::ValidationError, "inverse neighbour cap must be at least 1");
    const std::string query = inverse_query(object, property, cap + 1);
    const char sep = config_.sparql_url.find('?') == std::string::npos ? '?' : '&';
    const std::string url =
        config_.sparql_url + sep + "format=json&query=" + httplib::detail::encode_query_param(query);
    bool not_found = false;
    const std::string body = get(url, &not_found);
    if (not_found) fail(ErrorKind::TransportError, "SPARQL endpoint " + config_.sparql_url + " not found");

    InverseNeighbors out;
    for (EntityId s : parse_sparql_entities(body, "s")) out.triples.push_back({s, property, object});
    if (out.triples.size() > cap) {
        out.truncated = true;
        out.triples.resize(cap);
    }
    return out;
}

LiveSource::LiveSource(WikidataClient& client, std::size_t inverse_cap, bool fetch_labels)
    : client_(client), inverse_cap_(inverse_cap), fetch_labels_(fetch_labels) {}

const EntityFragment* LiveSource::fragment(EntityId entity) {
    auto it = fragments_.find(entity);
    if (it == fragments_.end()) {
        std::optional<EntityFragment> f;
        try {
            f = client_.fetch_entity(entity);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::NotFound) throw;
        }
        it = fragments_.emplace(entity, std::move(f)).first;
    }
    return it->second ? &*it->second : nullptr;
}

NeighborBatch LiveSource::neighbors(EntityId entity, std::span<const PropertySpec> specs) {
    NeighborBatch batch;
    for (const PropertySpec& spec : specs) {
        if (spec.direction == Direction::Direct) {
            if (const EntityFragment* f = fragment(entity)) {
                for (const Triple& t : f->triples)
                    if (t.property == spec.property) batch.neighbors.push_back({spec, t.object});
            }
        } else {
            auto inverse = client_.fetch_inverse_neighbors(entity, spec.property, inverse_cap_);
            batch.truncated = batch.truncated || inverse.truncated;
            for (const Triple& t : inverse.triples) batch.neighbors.push_back({spec, t.subject});
        }
    }
    std::sort(batch.neighbors.begin(), batch.neighbors.end());
    batch.neighbors.erase(std::unique(batch.neighbors.begin(), batch.neighbors.end()), batch.neighbors.end());
    return batch;
}

std::optional<Label> LiveSource::label(EntityId entity) {
    if (!fetch_labels_ && !fragments_.contains(entity)) return std::nullopt;
    try {
        if (const EntityFragment* f = fragment(entity)) {
            if (auto it = f->labels.find(entity); it != f->labels.end()) return it->second;
        }
    } catch (const Error&) {
    }
    return std::nullopt;
}

}  // namespace kgp
