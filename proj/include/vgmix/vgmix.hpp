#pragma once

#include "vgmix/criteria.hpp"
#include "vgmix/distributions.hpp"
#include "vgmix/em.hpp"
#include "vgmix/errors.hpp"
#include "vgmix/linalg.hpp"
#include "vgmix/metrics.hpp"
#include "vgmix/model_api.hpp"
#include "vgmix/model_io.hpp"
#include "vgmix/simulate.hpp"
#include "vgmix/specfun.hpp"
