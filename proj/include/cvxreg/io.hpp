#pragma once

#include <string>

#include "cvxreg/model.hpp"

namespace cvxreg {

/// Reads a dataset CSV with header `x1,...,xd,y`; a leading `tag` column
/// (frontier data) is detected from the header. Decimal point '.', UTF-8.
Dataset read_dataset_csv(const std::string& path);
Dataset dataset_from_csv(const std::string& text, const std::string& origin = "<string>");

void write_dataset_csv(const Dataset& data, const std::string& path);
std::string dataset_to_csv(const Dataset& data);

/// Input rows plus a `yhat` column; with_subgradients adds beta1..betad.
void write_predictions_csv(const Dataset& data, const PwlModel& model,
                           bool with_subgradients, const std::string& path);

}  // namespace cvxreg
