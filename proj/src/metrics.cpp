#include "edgelearn/metrics.hpp"

#include <cmath>
#include <limits>

#include "edgelearn/common.hpp"

namespace edgelearn::metrics {

Scores score(const std::vector<int>& truth, const std::vector<int>& predicted, int num_classes) {
    if (truth.size() != predicted.size())
        throw MetricError("score: truth and prediction lengths differ");
    if (truth.empty()) throw MetricError("score: empty evaluation set");
    if (num_classes < 1) throw MetricError("score: num_classes must be positive");

    std::size_t correct = 0;
    std::vector<std::size_t> class_total(num_classes + 1, 0), class_hit(num_classes + 1, 0);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        int y = truth[i];
        if (y < 1 || y > num_classes) throw MetricError("score: truth label out of range");
        ++class_total[y];
        if (predicted[i] == y) {
            ++correct;
            ++class_hit[y];
        }
    }

    Scores s;
    s.support = truth.size();
    s.precision = double(correct) / double(truth.size());

    double recall_sum = 0.0;
    int present = 0;
    for (int c = 1; c <= num_classes; ++c) {
        if (class_total[c] == 0) continue;
        recall_sum += double(class_hit[c]) / double(class_total[c]);
        ++present;
    }
    s.recall = present > 0 ? recall_sum / present : 0.0;
    s.f_measure = f_measure(s.precision, s.recall);
    return s;
}

std::vector<double> per_class_accuracy(const std::vector<int>& truth,
                                       const std::vector<int>& predicted, int num_classes) {
    if (truth.size() != predicted.size())
        throw MetricError("per_class_accuracy: truth and prediction lengths differ");
    if (num_classes < 1) throw MetricError("per_class_accuracy: num_classes must be positive");

    std::vector<std::size_t> total(num_classes + 1, 0), hit(num_classes + 1, 0);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        int y = truth[i];
        if (y < 1 || y > num_classes)
            throw MetricError("per_class_accuracy: truth label out of range");
        ++total[y];
        if (predicted[i] == y) ++hit[y];
    }
    std::vector<double> acc(num_classes);
    for (int c = 1; c <= num_classes; ++c)
        acc[c - 1] = total[c] == 0 ? std::numeric_limits<double>::quiet_NaN()
                                   : double(hit[c]) / double(total[c]);
    return acc;
}

double f_measure(double precision, double recall) {
    double denom = precision + recall;
    if (denom == 0.0) return 0.0;
    return 2.0 * precision * recall / denom;
}

bool is_ppg_defined(double f_base) { return f_base < 1.0; }

double ppg(double f_base, double f_step) {
    if (!is_ppg_defined(f_base))
        throw MetricError("ppg: undefined for a perfect baseline (f_base == 1)");
    return 1.0 - (1.0 - f_step) / (1.0 - f_base);
}

double t_critical_975(std::size_t df) {
    // Two-sided 95% critical values for df = 1..30; larger df fall back to
    // the normal-limit value.
    static const double table[31] = {
        0.0,     12.7062, 4.3027, 3.1824, 2.7764, 2.5706, 2.4469, 2.3646,
        2.3060,  2.2622,  2.2281, 2.2010, 2.1788, 2.1604, 2.1448, 2.1314,
        2.1199,  2.1098,  2.1009, 2.0930, 2.0860, 2.0796, 2.0739, 2.0687,
        2.0639,  2.0595,  2.0555, 2.0518, 2.0484, 2.0452, 2.0423};
    if (df == 0) throw MetricError("t_critical_975: df must be positive");
    if (df <= 30) return table[df];
    return 1.9600;
}

MeanCI mean_ci95(const std::vector<double>& values) {
    MeanCI ci;
    ci.n = values.size();
    if (values.empty()) throw MetricError("mean_ci95: empty sample");
    double sum = 0.0;
    for (double v : values) sum += v;
    ci.mean = sum / double(values.size());
    if (values.size() < 2) return ci;

    double ss = 0.0;
    for (double v : values) {
        double dev = v - ci.mean;
        ss += dev * dev;
    }
    double sd = std::sqrt(ss / double(values.size() - 1));
    ci.half_width = t_critical_975(values.size() - 1) * sd / std::sqrt(double(values.size()));
    return ci;
}

}  // namespace edgelearn::metrics
