#include "gr/eval.hpp"

#include <cmath>
#include <cstdio>

namespace gr::eval {

long ConfusionMatrix::total() const {
    long t = 0;
    for (const auto& row : counts)
        for (long v : row) t += v;
    return t;
}

ConfusionMatrix confusion(const std::vector<int>& predictions, const std::vector<int>& actuals,
                          const std::vector<std::string>& classes) {
    if (predictions.size() != actuals.size())
        throw ParameterError("confusion: prediction/actual length mismatch");
    const int c = static_cast<int>(classes.size());
    if (c == 0) throw ParameterError("confusion: no classes");

    ConfusionMatrix cm;
    cm.classes = classes;
    cm.counts.assign(c, std::vector<long>(c, 0));
    cm.percent.assign(c, std::vector<double>(c, 0.0));
    cm.column_empty.assign(c, false);

    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const int p = predictions[i], a = actuals[i];
        if (p < 0 || p >= c || a < 0 || a >= c)
            throw ParameterError("confusion: class index out of range");
        ++cm.counts[p][a];
    }
    for (int a = 0; a < c; ++a) {
        long col = 0;
        for (int p = 0; p < c; ++p) col += cm.counts[p][a];
        if (col == 0) {
            cm.column_empty[a] = true;
            continue;
        }
        for (int p = 0; p < c; ++p)
            cm.percent[p][a] = 100.0 * static_cast<double>(cm.counts[p][a]) /
                               static_cast<double>(col);
    }
    return cm;
}

std::vector<double> per_class_rate(const ConfusionMatrix& cm) {
    std::vector<double> rates(cm.classes.size());
    for (std::size_t i = 0; i < cm.classes.size(); ++i) rates[i] = cm.percent[i][i];
    return rates;
}

std::string confusion_to_csv(const ConfusionMatrix& cm) {
    std::string out = "predicted\\actual";
    for (const auto& c : cm.classes) out += "," + c;
    out += "\n";
    char buf[32];
    for (std::size_t p = 0; p < cm.classes.size(); ++p) {
        out += cm.classes[p];
        for (std::size_t a = 0; a < cm.classes.size(); ++a) {
            std::snprintf(buf, sizeof(buf), ",%.1f", cm.percent[p][a]);
            out += buf;
        }
        out += "\n";
    }
    return out;
}

namespace {

// Continued fraction for the incomplete beta (modified Lentz).
double betacf(double a, double b, double x) {
    constexpr double tiny = 1e-300;
    constexpr int max_iter = 500;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < 3e-16) return h;
    }
    return h;  // converged to working precision in practice well before this
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (a <= 0.0 || b <= 0.0) throw ParameterError("incomplete_beta: a, b must be positive");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                         a * std::log(x) + b * std::log1p(-x);
    const double bt = std::exp(ln_bt);
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
    return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, long df) {
    if (df < 1) throw ParameterError("student_t_cdf: df must be >= 1");
    if (t == 0.0) return 0.5;
    const double x = df / (df + t * t);
    // two-tail mass beyond |t|
    const double p = incomplete_beta(0.5 * df, 0.5, x);
    return t > 0.0 ? 1.0 - 0.5 * p : 0.5 * p;
}

TTestReport one_sample_ttest(const std::vector<double>& samples, double mu) {
    const long n = static_cast<long>(samples.size());
    if (n < 2) throw ParameterError("one_sample_ttest: need at least 2 samples");
    double mean = 0.0;
    for (double s : samples) mean += s;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double s : samples) ss += (s - mean) * (s - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (sd == 0.0) throw DegenerateSampleError("one_sample_ttest: zero standard deviation");

    TTestReport r;
    r.n = n;
    r.mean = mean;
    r.sd = sd;
    r.sem = sd / std::sqrt(static_cast<double>(n));
    r.mu = mu;
    r.t = (mean - mu) / r.sem;
    r.df = n - 1;
    r.p_two_sided = incomplete_beta(0.5 * r.df, 0.5, r.df / (r.df + r.t * r.t));
    r.p_one_sided = 0.5 * r.p_two_sided;
    return r;
}

std::vector<double> kfold_accuracy_samples(ensemble::EnsembleModel& model,
                                           const dataset::DatasetManifest& manifest,
                                           const std::vector<long>& test_indices, int k,
                                           std::uint64_t seed) {
    if (k < 2) throw ParameterError("kfold: k must be >= 2");
    if (static_cast<std::size_t>(k) > test_indices.size())
        throw ParameterError("kfold: k exceeds the number of test samples");

    std::vector<long> shuffled = test_indices;
    Rng rng(seed);
    portable_shuffle(shuffled, rng);

    const long n = static_cast<long>(shuffled.size());
    const long base = n / k, rem = n % k;
    std::vector<double> accuracies;
    long pos = 0;
    for (int part = 0; part < k; ++part) {
        const long len = base + (part < rem ? 1 : 0);
        std::vector<long> fold(shuffled.begin() + pos, shuffled.begin() + pos + len);
        pos += len;
        accuracies.push_back(ensemble::evaluate(model, manifest, fold).accuracy);
    }
    return accuracies;
}

}  // namespace gr::eval
