#pragma once

#include "soo/error.hpp"
#include "soo/linalg.hpp"
#include "soo/rand.hpp"
#include "soo/oracle.hpp"
#include "soo/optimizer.hpp"
#include "soo/theory.hpp"
#include "soo/experiments.hpp"
#include "soo/io.hpp"
