#pragma once

#include "qprobe/closedform.hpp"
#include "qprobe/config.hpp"
#include "qprobe/csv.hpp"
#include "qprobe/intervals.hpp"
#include "qprobe/model.hpp"
#include "qprobe/parallel.hpp"
#include "qprobe/superop.hpp"
#include "qprobe/sweep.hpp"
#include "qprobe/trajectory.hpp"
#include "qprobe/types.hpp"
#include "qprobe/verify.hpp"
