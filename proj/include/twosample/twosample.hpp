#pragma once

#include "asymptotics.hpp"
#include "error.hpp"
#include "functionals.hpp"
#include "hypothesis.hpp"
#include "io.hpp"
#include "measures.hpp"
#include "montecarlo.hpp"
#include "real_fn.hpp"
#include "rng.hpp"
#include "tangents.hpp"
