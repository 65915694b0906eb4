#pragma once
// Wiring shared by the command line and the job service: where neighbourhoods come
// from and which classifier decides.

#include <filesystem>
#include <memory>
#include <optional>

#include "kgprune/analogy.hpp"
#include "kgprune/ingest.hpp"
#include "kgprune/service.hpp"

namespace kgp {

struct AnalogyBundle {
    AnalogyModel model = AnalogyModel::zeros(ModelShape{});
    EmbeddingTable table;
    std::vector<DecisionExample> references;   // only fully embedded ones
    std::size_t dropped_references = 0;
};

// Throws IoError, FormatError, DimensionMismatch, InsufficientData (no usable reference).
AnalogyBundle load_analogy(const std::filesystem::path& model, const std::filesystem::path& embeddings,
                           const std::filesystem::path& references);

struct Runtime {
    std::shared_ptr<const AdjacencySnapshot> snapshot;   // snapshot mode when set
    std::optional<EndpointConfig> endpoint;              // live mode otherwise
    std::optional<std::filesystem::path> cache_dir;
    std::shared_ptr<const AnalogyBundle> analogy;
};

// Each call runs one sequential extraction; the executor may be called concurrently.
Executor make_executor(const Runtime& runtime);

}  // namespace kgp
