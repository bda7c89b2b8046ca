#include "core/parallel.hpp"

#include <cstdlib>

namespace chirascope {

unsigned resolve_threads(unsigned requested) {
    if (requested) return requested;
    if (const char* env = std::getenv("CHIRASCOPE_THREADS")) {
        char* end = nullptr;
        const unsigned long v = std::strtoul(env, &end, 10);
        if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(std::min<unsigned long>(v, 1024));
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

}  // namespace chirascope
