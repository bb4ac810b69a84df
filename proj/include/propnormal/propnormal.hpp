#pragma once

#include "propnormal/builtin.hpp"
#include "propnormal/common.hpp"
#include "propnormal/eikonal.hpp"
#include "propnormal/expr.hpp"
#include "propnormal/gunter.hpp"
#include "propnormal/surface.hpp"
#include "propnormal/tubular.hpp"
