#pragma once

#include <string>
#include <vector>

#include "gr/common.hpp"
#include "gr/dataset.hpp"
#include "gr/ensemble.hpp"

namespace gr::eval {

// Rows are predicted labels, columns are actual labels; percent normalizes
// each actual-label column to 100.
struct ConfusionMatrix {
    std::vector<std::string> classes;
    std::vector<std::vector<long>> counts;     // [predicted][actual]
    std::vector<std::vector<double>> percent;  // column-normalized, 0..100
    std::vector<bool> column_empty;            // actual classes with no samples

    long total() const;
};

ConfusionMatrix confusion(const std::vector<int>& predictions, const std::vector<int>& actuals,
                          const std::vector<std::string>& classes);

// Diagonal of the column-normalized matrix: recognition rate per class.
std::vector<double> per_class_rate(const ConfusionMatrix& cm);

std::string confusion_to_csv(const ConfusionMatrix& cm);

struct TTestReport {
    long n = 0;
    double mean = 0.0;
    double sd = 0.0;  // sample standard deviation (n-1)
    double sem = 0.0;
    double mu = 0.0;
    double t = 0.0;
    long df = 0;
    double p_one_sided = 0.0;
    double p_two_sided = 0.0;
};

// t = (mean - mu) / (sd / sqrt(n)); p-values from the Student-t CDF.
TTestReport one_sample_ttest(const std::vector<double>& samples, double mu);

// CDF of Student's t with df degrees of freedom, via the regularized
// incomplete beta function. F(0) = 0.5 exactly.
double student_t_cdf(double t, long df);

// Continued-fraction regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);

// Seeded shuffle of the index list into k near-equal parts; accuracy of the
// ensemble on each part.
std::vector<double> kfold_accuracy_samples(ensemble::EnsembleModel& model,
                                           const dataset::DatasetManifest& manifest,
                                           const std::vector<long>& test_indices, int k,
                                           std::uint64_t seed);

}  // namespace gr::eval
