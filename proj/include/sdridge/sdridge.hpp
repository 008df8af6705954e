#pragma once

#include "sdridge/errors.hpp"
#include "sdridge/dataset.hpp"
#include "sdridge/ridge.hpp"
#include "sdridge/smoother.hpp"
#include "sdridge/structural.hpp"
#include "sdridge/asymptotics.hpp"
#include "sdridge/tuning.hpp"
#include "sdridge/variants.hpp"
#include "sdridge/simulation.hpp"
#include "sdridge/io.hpp"
#include "sdridge/pipeline.hpp"
