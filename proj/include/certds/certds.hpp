#pragma once

#include "certds/error.hpp"
#include "certds/random.hpp"
#include "certds/geometry.hpp"
#include "certds/dataset.hpp"
#include "certds/net.hpp"
#include "certds/certificates.hpp"
#include "certds/config.hpp"
#include "certds/scores.hpp"
#include "certds/conformal.hpp"
#include "certds/training.hpp"
#include "certds/rollout.hpp"
#include "certds/checkpoint.hpp"

namespace certds {

inline constexpr const char* version = "0.1.0";

}  // namespace certds
