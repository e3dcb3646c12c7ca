#pragma once

#include <vector>

#include "voldose/grid.hpp"

namespace voldose {

// One paired training example: normalized anatomical inputs plus one
// normalized conductor target per network output track. labels are kept
// for evaluation only.
struct TrainingSample {
    std::vector<ScalarGrid> inputs;  // normalized T1, T2
    std::vector<ScalarGrid> targets; // normalized conductor per output v
    LabelGrid labels;
};

struct TrainingSet {
    std::vector<TrainingSample> samples;
};

} // namespace voldose
