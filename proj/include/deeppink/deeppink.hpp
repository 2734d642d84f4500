#pragma once

#include "deeppink/csv.hpp"
#include "deeppink/data.hpp"
#include "deeppink/diagnostics.hpp"
#include "deeppink/errors.hpp"
#include "deeppink/filter.hpp"
#include "deeppink/knockoffs.hpp"
#include "deeppink/net.hpp"
#include "deeppink/report.hpp"
#include "deeppink/rng.hpp"
#include "deeppink/simgen.hpp"
#include "deeppink/version.hpp"
