// Umbrella header.
#pragma once

#include "relkep/errors.hpp"
#include "relkep/phase_space.hpp"
#include "relkep/perturbation.hpp"
#include "relkep/vector_field.hpp"
#include "relkep/quadrature.hpp"
#include "relkep/unperturbed.hpp"
#include "relkep/action_angle.hpp"
#include "relkep/integrator.hpp"
#include "relkep/torus_chart.hpp"
#include "relkep/periodic_finder.hpp"
