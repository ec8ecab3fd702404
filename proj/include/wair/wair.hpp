#ifndef WAIR_WAIR_HPP
#define WAIR_WAIR_HPP

#include "wair/errors.hpp"
#include "wair/spatial.hpp"
#include "wair/robot.hpp"
#include "wair/state.hpp"
#include "wair/kinematics.hpp"
#include "wair/dynamics.hpp"
#include "wair/terrain.hpp"
#include "wair/gait.hpp"
#include "wair/body_model.hpp"
#include "wair/nlp.hpp"
#include "wair/collocation.hpp"
#include "wair/scenario.hpp"
#include "wair/episode.hpp"
#include "wair/export.hpp"

#endif  // WAIR_WAIR_HPP
