#include "oasis/kern/kernels.hpp"

#include <cstdint>
#include <cstdlib>
#include <stdexcept>

namespace oasis::kern {
namespace {

#if defined(__x86_64__) || defined(__i386__)
void cpuid(uint32_t leaf, uint32_t subleaf, uint32_t regs[4]) {
    asm volatile("cpuid"
                 : "=a"(regs[0]), "=b"(regs[1]), "=c"(regs[2]), "=d"(regs[3])
                 : "a"(leaf), "c"(subleaf));
}
#endif

const Kernels* g_active = nullptr;

const Kernels& pick(const std::string& name) {
    const CpuFeatures cpu = detect_cpu();
    if (name == "scalar") return scalar_kernels();
    if (name == "avx2") {
        if (!(cpu.avx2 && cpu.fma))
            throw std::runtime_error("avx2 kernels requested but CPU lacks AVX2+FMA");
        return avx2_kernels();
    }
    if (name == "auto" || name.empty())
        return (cpu.avx2 && cpu.fma) ? avx2_kernels() : scalar_kernels();
    throw std::runtime_error("unknown kernel backend '" + name +
                             "' (expected auto|scalar|avx2)");
}

}  // namespace

CpuFeatures detect_cpu() {
    CpuFeatures f;
#if defined(__x86_64__) || defined(__i386__)
    uint32_t regs[4];
    cpuid(0, 0, regs);
    const uint32_t max_leaf = regs[0];
    if (max_leaf >= 1) {
        cpuid(1, 0, regs);
        f.fma = (regs[2] & (1u << 12)) != 0;
    }
    if (max_leaf >= 7) {
        cpuid(7, 0, regs);
        f.avx2 = (regs[1] & (1u << 5)) != 0;
    }
#endif
    return f;
}

const Kernels& active() {
    if (!g_active) {
        const char* env = std::getenv("OASIS_KERNELS");
        g_active = &pick(env ? env : "auto");
    }
    return *g_active;
}

void select_backend(const std::string& name) { g_active = &pick(name); }

}  // namespace oasis::kern
