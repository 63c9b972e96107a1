#include <ostream>

#include <json.hpp>

#include "cldeepc/errors.hpp"
#include "cldeepc/predictors.hpp"

namespace cldeepc {

namespace {

using nlohmann::json;

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from(const json& rows, Index expect_rows, Index expect_cols) {
  if (!rows.is_array() || static_cast<Index>(rows.size()) != expect_rows)
    throw DimensionError("matrix json: unexpected row count");
  Matrix m(expect_rows, expect_cols);
  for (Index i = 0; i < expect_rows; ++i) {
    const json& row = rows.at(i);
    if (static_cast<Index>(row.size()) != expect_cols)
      throw DimensionError("matrix json: unexpected column count");
    for (Index j = 0; j < expect_cols; ++j) m(i, j) = row.at(j).get<double>();
  }
  return m;
}

}  // namespace

std::string to_json(const OneStepCoeffs& coeffs) {
  json j;
  j["past"] = coeffs.past;
  j["inputs"] = coeffs.inputs;
  j["outputs"] = coeffs.outputs;
  j["beta"] = json::array();
  for (const Matrix& b : coeffs.beta) j["beta"].push_back(matrix_json(b));
  j["theta"] = json::array();
  for (const Matrix& t : coeffs.theta) j["theta"].push_back(matrix_json(t));
  return j.dump(2);
}

std::string to_json(const PredictorMatrices& m) {
  json j;
  j["past"] = m.past;
  j["horizon"] = m.horizon;
  j["inputs"] = m.inputs;
  j["outputs"] = m.outputs;
  j["Lu"] = matrix_json(m.lu);
  j["Gu"] = matrix_json(m.gu);
  j["Ly"] = matrix_json(m.ly);
  return j.dump(2);
}

OneStepCoeffs one_step_coeffs_from_json(const std::string& text) {
  const json j = json::parse(text);
  OneStepCoeffs c;
  c.past = j.at("past").get<int>();
  c.inputs = j.at("inputs").get<int>();
  c.outputs = j.at("outputs").get<int>();
  const json& beta = j.at("beta");
  const json& theta = j.at("theta");
  if (static_cast<int>(beta.size()) != c.past + 1 || static_cast<int>(theta.size()) != c.past)
    throw DimensionError("one_step_coeffs_from_json: wrong coefficient count");
  for (const json& b : beta) c.beta.push_back(matrix_from(b, c.outputs, c.inputs));
  for (const json& t : theta) c.theta.push_back(matrix_from(t, c.outputs, c.outputs));
  return c;
}

PredictorMatrices predictor_matrices_from_json(const std::string& text) {
  const json j = json::parse(text);
  PredictorMatrices m;
  m.past = j.at("past").get<int>();
  m.horizon = j.at("horizon").get<int>();
  m.inputs = j.at("inputs").get<int>();
  m.outputs = j.at("outputs").get<int>();
  const Index fl = static_cast<Index>(m.horizon) * m.outputs;
  m.lu = matrix_from(j.at("Lu"), fl, static_cast<Index>(m.past) * m.inputs);
  m.gu = matrix_from(j.at("Gu"), fl, static_cast<Index>(m.horizon) * m.inputs);
  m.ly = matrix_from(j.at("Ly"), fl, static_cast<Index>(m.past) * m.outputs);
  return m;
}

void write_matrix_csv(std::ostream& os, const Matrix& m) {
  const auto old = os.precision(17);
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j) os << ',';
      os << m(i, j);
    }
    os << '\n';
  }
  os.precision(old);
}

void write_coeffs_csv(std::ostream& os, const OneStepCoeffs& coeffs) {
  const auto old = os.precision(17);
  os << "kind,index,row,col,value\n";
  auto emit = [&](const char* kind, const std::vector<Matrix>& blocks) {
    for (std::size_t k = 0; k < blocks.size(); ++k)
      for (Index i = 0; i < blocks[k].rows(); ++i)
        for (Index j = 0; j < blocks[k].cols(); ++j)
          os << kind << ',' << k + 1 << ',' << i << ',' << j << ',' << blocks[k](i, j) << '\n';
  };
  emit("beta", coeffs.beta);
  emit("theta", coeffs.theta);
  os.precision(old);
}

}  // namespace cldeepc
