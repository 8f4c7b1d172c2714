#pragma once

#include "omcrl/autodiff/tape.hpp"

#include <random>

namespace omcrl::nn {

// Orthogonal initialization of a weight viewed as [rows x cols] (row-major
// storage of Parameter::value), scaled by gain.
void orthogonal_init(ad::Parameter& p, ad::Index rows, ad::Index cols, double gain,
                     std::mt19937_64& rng);

}  // namespace omcrl::nn
