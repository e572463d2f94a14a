#ifndef FEDSCALE_FEDSCALE_HPP
#define FEDSCALE_FEDSCALE_HPP

#include "errors.hpp"
#include "geometry.hpp"
#include "hetero.hpp"
#include "matcore.hpp"
#include "optimal_size.hpp"
#include "ou_dynamics.hpp"
#include "pac_bounds.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "scaling_fit.hpp"

#endif // FEDSCALE_FEDSCALE_HPP
