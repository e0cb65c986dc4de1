#pragma once

#include "elpar/data.hpp"
#include "elpar/elpar.hpp"
#include "elpar/error.hpp"
#include "elpar/eval.hpp"
#include "elpar/glm.hpp"
#include "elpar/io.hpp"
#include "elpar/lines.hpp"
#include "elpar/market.hpp"
#include "elpar/api.hpp"
#include "elpar/simulate.hpp"
#include "elpar/skellam.hpp"
