#pragma once

#include "mdsession/interval.hpp"
#include "mdsession/ingestion.hpp"
#include "mdsession/sessions.hpp"
#include "mdsession/patterns.hpp"
#include "mdsession/descriptive.hpp"
#include "mdsession/robust.hpp"
#include "mdsession/battery.hpp"
#include "mdsession/synthetic.hpp"
