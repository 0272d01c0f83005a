#pragma once

#include "quadlab/config.hpp"
#include "quadlab/control.hpp"
#include "quadlab/dynamics.hpp"
#include "quadlab/error.hpp"
#include "quadlab/excitation.hpp"
#include "quadlab/flight_log.hpp"
#include "quadlab/geo.hpp"
#include "quadlab/linearization.hpp"
#include "quadlab/sensors.hpp"
#include "quadlab/sysid.hpp"
#include "quadlab/validation.hpp"
