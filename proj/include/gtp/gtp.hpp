#pragma once

#include "gtp/aml.hpp"
#include "gtp/consistency.hpp"
#include "gtp/error.hpp"
#include "gtp/grounding.hpp"
#include "gtp/pddl.hpp"
#include "gtp/pddl_io.hpp"
#include "gtp/planner.hpp"
#include "gtp/rpg_sim.hpp"
#include "gtp/scenario.hpp"
#include "gtp/trace.hpp"
#include "gtp/play_session.hpp"
