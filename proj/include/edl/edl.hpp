#pragma once

// Everything at once. Pull in the individual headers to keep compile times down.

#include "edl/error.hpp"
#include "edl/text.hpp"
#include "edl/domain.hpp"
#include "edl/json_io.hpp"
#include "edl/grading.hpp"
#include "edl/external_provider.hpp"
#include "edl/session.hpp"
#include "edl/store.hpp"
#include "edl/grade_csv.hpp"
#include "edl/engine.hpp"
#include "edl/teacher_intake.hpp"
#include "edl/analytics.hpp"
#include "edl/reports.hpp"
#include "edl/simulation.hpp"
#include "edl/service.hpp"
