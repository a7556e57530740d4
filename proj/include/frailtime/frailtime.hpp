#pragma once

#include "frailtime/analysis1d.hpp"
#include "frailtime/dataio.hpp"
#include "frailtime/error.hpp"
#include "frailtime/fit.hpp"
#include "frailtime/inference.hpp"
#include "frailtime/likelihood.hpp"
#include "frailtime/numeric.hpp"
#include "frailtime/optimizer.hpp"
#include "frailtime/params.hpp"
#include "frailtime/serialize.hpp"
#include "frailtime/simulate.hpp"
#include "frailtime/svg.hpp"
#include "frailtime/timegrid.hpp"
