#include <fstream>
#include <sstream>

#include "json.hpp"
#include "kgprune/error.hpp"
#include "kgprune/ingest.hpp"

namespace kgp {
namespace {

using nlohmann::json;
constexpr std::string_view kCacheSchema = "kgp-fragment/1";

json encode(const EntityFragment& f, FragmentCache::Clock::time_point fetched_at) {
    json triples = json::array();
    for (const auto& t : f.triples)
        triples.push_back({to_string(t.subject), property_text(t.property), to_string(t.object)});
    json labels = json::object();
    for (const auto& [id, l] : f.labels)
        labels[to_string(id)] = {{"text", l.text}, {"language", l.language}, {"description", l.description}};
    const auto seconds =
        std::chrono::duration_cast<std::chrono::seconds>(fetched_at.time_since_epoch()).count();
    return {{"schema", kCacheSchema}, {"root", to_string(f.root)}, {"fetched_at", seconds},
            {"triples", std::move(triples)}, {"labels", std::move(labels)}};
}

// Any structural problem surfaces as a json exception or kgp::Error; the caller evicts.
std::pair<EntityFragment, std::int64_t> decode(const std::string& text) {
    const json j = json::parse(text);
    if (j.at("schema").get<std::string>() != kCacheSchema) fail(ErrorKind::IoError, "unknown cache schema");
    EntityFragment f;
    f.root = parse_entity_id(j.at("root").get<std::string>());
    for (const auto& t : j.at("triples")) {
        f.triples.push_back({parse_entity_id(t.at(0).get<std::string>()),
                             parse_property_number(t.at(1).get<std::string>()),
                             parse_entity_id(t.at(2).get<std::string>())});
    }
    for (const auto& [id, l] : j.at("labels").items()) {
        f.labels.emplace(parse_entity_id(id), Label{l.at("text").get<std::string>(),
                                                    l.at("language").get<std::string>(),
                                                    l.at("description").get<std::string>()});
    }
    return {std::move(f), j.at("fetched_at").get<std::int64_t>()};
}

}  // namespace

FragmentCache::FragmentCache(std::filesystem::path dir, std::optional<std::chrono::seconds> staleness)
    : dir_(std::move(dir)), staleness_(staleness) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) fail(ErrorKind::IoError, "cannot create cache directory " + dir_.string() + ": " + ec.message());
}

std::filesystem::path FragmentCache::path_for(EntityId id) const {
    return dir_ / (to_string(id) + ".json");
}

std::optional<EntityFragment> FragmentCache::get(EntityId id) const {
    const auto path = path_for(id);
    std::string text;
    {
        std::shared_lock lock(mutex_);
        std::ifstream in(path, std::ios::binary);
        if (!in) return std::nullopt;
        std::ostringstream buf;
        buf << in.rdbuf();
        text = buf.str();
    }
    try {
        auto [fragment, fetched_at] = decode(text);
        if (fragment.root != id) fail(ErrorKind::IoError, "cache entry root mismatch");
        if (staleness_) {
            const auto age = Clock::now() - Clock::time_point(std::chrono::seconds(fetched_at));
            if (age > *staleness_) return std::nullopt;
        }
        return std::move(fragment);
    } catch (const std::exception&) {
        std::unique_lock lock(mutex_);
        std::error_code ec;
        std::filesystem::remove(path, ec);
        ++evictions_;
        return std::nullopt;
    }
}

void FragmentCache::put(const EntityFragment& fragment, Clock::time_point fetched_at) {
    const std::string text = encode(fragment, fetched_at).dump();
    const auto path = path_for(fragment.root);
    auto tmp = path;
    tmp += ".tmp";
    std::unique_lock lock(mutex_);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << text;
        if (!out) fail(ErrorKind::IoError, "cannot write cache entry " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) fail(ErrorKind::IoError, "cannot write cache entry " + path.string() + ": " + ec.message());
}

}  // namespace kgp
