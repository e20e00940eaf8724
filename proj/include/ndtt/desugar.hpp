#pragma once

#include "ndtt/ast.hpp"

namespace ndtt {

// Unfolds `:--` highway rules: every rule whose body mentions a highway-defined
// functor acquires one variant per definition, with the unfolded element
// replaced by the definition body (the trigger of an update rule is instead
// retained with a `: 0` annotation) and all other elements retained with
// `: 0` annotations. Chained `:--` definitions are closed transitively before
// unfolding. The `:--` rules themselves become ordinary `:-` rules.
// Idempotent; throws CyclicDeduction if the `:--` definitions are cyclic at
// the functor level.
Ast desugar_highways(const Ast& ast);

}  // namespace ndtt
