#include "kgprune/runtime.hpp"

#include "kgprune/error.hpp"

namespace kgp {

AnalogyBundle load_analogy(const std::filesystem::path& model, const std::filesystem::path& embeddings,
                           const std::filesystem::path& references) {
    AnalogyBundle b;
    b.model = load_model(model);
    b.table = load_embeddings(embeddings);
    if (b.model.shape().dimension != b.table.dimension())
        fail(ErrorKind::DimensionMismatch, "model expects dimension " + std::to_string(b.model.shape().dimension) +
                                               " but embeddings have dimension " + std::to_string(b.table.dimension()));
    for (const auto& ex : load_decision_csv(references).examples) {
        if (b.table.has_entity(ex.seed) && b.table.has_entity(ex.neighbor)) b.references.push_back(ex);
        else ++b.dropped_references;
    }
    if (b.references.empty())
        fail(ErrorKind::InsufficientData, "no reference decision has both entities embedded in " + embeddings.string());
    return b;
}

Executor make_executor(const Runtime& runtime) {
    std::shared_ptr<WikidataClient> client;
    std::shared_ptr<FragmentCache> cache;
    if (!runtime.snapshot) {
        if (!runtime.endpoint) fail(ErrorKind::ValidationError, "either a snapshot or an endpoint is required");
        if (runtime.cache_dir) cache = std::make_shared<FragmentCache>(*runtime.cache_dir);
        client = std::make_shared<WikidataClient>(*runtime.endpoint, cache.get());
    }
    const auto snapshot = runtime.snapshot;
    const auto analogy = runtime.analogy;
    return [snapshot, analogy, client, cache](const ExtractionTask& task, const ProgressFn& progress) {
        std::optional<AnalogyResources> resources;
        if (analogy) {
            const AnalogyModel* model = &analogy->model;
            resources = AnalogyResources{[model](const Quadruple& q) { return model->predict(q); }, &analogy->table,
                                         analogy->references};
        }
        const AnalogyResources* res = resources ? &*resources : nullptr;
        if (snapshot) {
            SnapshotSource source(*snapshot);
            return extract(task, source, res, progress);
        }
        LiveSource source(*client, task.degree_cap);
        return extract(task, source, res, progress);
    };
}

}  // namespace kgp
