#ifndef QLYAP_QLYAP_HPP
#define QLYAP_QLYAP_HPP

#include "qlyap/error.hpp"
#include "qlyap/operator_core.hpp"
#include "qlyap/models.hpp"
#include "qlyap/exponent.hpp"
#include "qlyap/koopman.hpp"
#include "qlyap/cp_structure.hpp"

#endif  // QLYAP_QLYAP_HPP
