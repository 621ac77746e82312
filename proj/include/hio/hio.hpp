#pragma once

#include "hio/dataset.hpp"
#include "hio/errors.hpp"
#include "hio/features.hpp"
#include "hio/harness.hpp"
#include "hio/hierarchy.hpp"
#include "hio/matrix.hpp"
#include "hio/nn.hpp"
#include "hio/rng.hpp"
