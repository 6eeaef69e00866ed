#pragma once

#include "pidflow/analysis.hpp"
#include "pidflow/dynamics.hpp"
#include "pidflow/errors.hpp"
#include "pidflow/graph.hpp"
#include "pidflow/integrator.hpp"
#include "pidflow/objectives.hpp"
#include "pidflow/random.hpp"
