#pragma once

#include "attack.hpp"
#include "detect.hpp"
#include "error.hpp"
#include "generate.hpp"
#include "harness.hpp"
#include "lm.hpp"
#include "metrics.hpp"
#include "prf.hpp"
#include "text.hpp"
