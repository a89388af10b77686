#ifndef COHFLOW_RUN_HPP
#define COHFLOW_RUN_HPP

#include "cohflow/config.hpp"

namespace cohflow {

// Executes the configured experiment, writes all artifacts plus
// manifest.json under the output directory, and returns the manifest.
// Errors carry the failing phase in their message.
Json run(Json config);

}  // namespace cohflow

#endif
