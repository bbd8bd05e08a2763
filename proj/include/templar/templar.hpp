#pragma once

#include "templar/ast.hpp"
#include "templar/backends.hpp"
#include "templar/choice.hpp"
#include "templar/difftest.hpp"
#include "templar/extract.hpp"
#include "templar/gen.hpp"
#include "templar/machine.hpp"
#include "templar/parse.hpp"
#include "templar/print.hpp"
#include "templar/prune.hpp"
#include "templar/template.hpp"
