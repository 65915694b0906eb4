#include "kgprune/simd.hpp"

#include <cstdlib>
#include <string_view>

namespace kgp::simd {

const KernelTable* avx2_kernels_unchecked() noexcept;

const KernelTable* avx2_kernels() noexcept {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
    static const bool supported =
        __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    return supported ? avx2_kernels_unchecked() : nullptr;
#else
    return nullptr;
#endif
}

const KernelTable& active() noexcept {
    static const KernelTable& table = [] () -> const KernelTable& {
        const char* forced = std::getenv("KGP_SIMD");
        if (forced != nullptr && std::string_view(forced) == "scalar") return scalar_kernels();
        if (const KernelTable* avx2 = avx2_kernels()) return *avx2;
        return scalar_kernels();
    }();
    return table;
}

}  // namespace kgp::simd
