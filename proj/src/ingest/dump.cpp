#include <fstream>

#include "kgprune/error.hpp"
#include "kgprune/ingest.hpp"

namespace kgp {

SnapshotReadResult load_dump(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::IoError, "cannot open snapshot " + path.string());
    SnapshotReadResult result = read_snapshot(in);
    if (in.bad()) fail(ErrorKind::IoError, "error while reading snapshot " + path.string());
    if (result.snapshot.empty())
        result.warnings.push_back(std::string(to_string(ErrorKind::EmptySnapshot)) + ": no triples in " +
                                  path.string());
    return result;
}

}  // namespace kgp
