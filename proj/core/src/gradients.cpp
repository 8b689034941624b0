#include "multigrad/gradients.hpp"

#include <string>

#include "multigrad/errors.hpp"

namespace multigrad {

void TaskGradients::validate() const {
    if (grads.empty()) throw ContractError("TaskGradients: no tasks");
    for (std::size_t i = 1; i < grads.size(); ++i)
        if (!grads[i].same_shape(grads[0]))
            throw ShapeError("TaskGradients: gradient " + std::to_string(i) +
                             " has a different shape than gradient 0");
    if (batch_separated && !batched)
        throw ContractError("TaskGradients: batch_separated requires batched");
    if (batch_separated && !activations)
        throw ContractError("TaskGradients: batch_separated requires activations");
    if (activations && !activations->same_shape(grads[0]))
        throw ShapeError("TaskGradients: activations shape differs from gradients");
    if (batched && grads[0].rank() == 0)
        throw ShapeError("TaskGradients: batched requires rank >= 1");
}

} // namespace multigrad
