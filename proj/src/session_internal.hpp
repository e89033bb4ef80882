#pragma once

#include "frustum/virtual_or.hpp"

namespace frustum::detail {

// Appends a recorded or freshly simulated shot and logs its Acquire event.
const SyntheticShot& append_shot(Session& session, SyntheticShot shot);

}  // namespace frustum::detail
