#pragma once

#include <cmath>

#include "tsonet/core/error.hpp"

namespace tsonet {

// Linear warm-up from 0 to base_lr over the first warmup_fraction of the run,
// then cosine annealing to 0 at the final step.
inline double lr_at(double step, double total_steps, double base_lr,
                    double warmup_fraction) {
    if (total_steps <= 0) throw config_error("lr_at: total_steps must be positive");
    if (!(warmup_fraction > 0.0 && warmup_fraction < 1.0))
        throw config_error("lr_at: warmup_fraction must be in (0,1)");
    const double warm = warmup_fraction * total_steps;
    if (step <= warm) return base_lr * (step / warm);
    const double t = (step - warm) / (total_steps - warm);
    return base_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * t));
}

} // namespace tsonet
