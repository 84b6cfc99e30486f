#pragma once

#include "rnerf/autodiff.hpp"
#include "rnerf/checkpoint.hpp"
#include "rnerf/config.hpp"
#include "rnerf/encoding.hpp"
#include "rnerf/errors.hpp"
#include "rnerf/evaluation.hpp"
#include "rnerf/field.hpp"
#include "rnerf/geometry.hpp"
#include "rnerf/network.hpp"
#include "rnerf/radiometry.hpp"
#include "rnerf/report.hpp"
#include "rnerf/sample.hpp"
#include "rnerf/scene_oracle.hpp"
#include "rnerf/train.hpp"
