#pragma once

#include "vice/dataset.hpp"
#include "vice/error.hpp"
#include "vice/eval.hpp"
#include "vice/format.hpp"
#include "vice/io.hpp"
#include "vice/model.hpp"
#include "vice/optim.hpp"
#include "vice/pac.hpp"
#include "vice/pruning.hpp"
#include "vice/synthetic.hpp"
