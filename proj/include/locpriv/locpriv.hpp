#pragma once

#include "locpriv/error.hpp"
#include "locpriv/rng.hpp"
#include "locpriv/core.hpp"
#include "locpriv/strategy.hpp"
#include "locpriv/adversary.hpp"
#include "locpriv/simplex.hpp"
#include "locpriv/lp_game.hpp"
#include "locpriv/approx.hpp"
#include "locpriv/approx2d.hpp"
#include "locpriv/simulator.hpp"
#include "locpriv/sequencer.hpp"
#include "locpriv/io.hpp"
