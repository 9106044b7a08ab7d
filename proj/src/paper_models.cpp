#include "risk.hpp"

#include "errors.hpp"

#include <array>
#include <map>

namespace ixrisk {

namespace {

struct Row {
    const char* name;
    double mean, lo, hi;
    double or_mean, or_lo, or_hi;
    int sig; // 2 -> 0.05, 1 -> 0.1 (the starred rows)
};

FittedModel build(const char* name, LocationClass cls, int slice, double auc,
                  std::initializer_list<Row> rows) {
    FittedModel m;
    m.name = name;
    m.location_class = cls;
    m.slice = slice;
    m.auc = auc;
    m.embedded = true;
    for (const Row& r : rows) {
        ModelVariable v;
        v.name = r.name;
        v.mean = r.mean;
        v.ci_lo = r.lo;
        v.ci_hi = r.hi;
        v.or_mean = r.or_mean;
        v.or_lo = r.or_lo;
        v.or_hi = r.or_hi;
        v.sig = r.sig == 2 ? SignificanceLevel::at_05 : SignificanceLevel::at_10;
        m.variables.push_back(v);
    }
    return m;
}

const std::map<std::string, FittedModel>& registry() {
    static const std::map<std::string, FittedModel> models = [] {
        std::map<std::string, FittedModel> r;

        r["within_full"] = build(
            "within_full", LocationClass::within, 0, 0.7596,
            {
                {"Avg_speed_0_5", -0.038, -0.07, -0.005, 0.963, 0.932, 0.995, 1},
                {"Std_speed_0_5", 0.066, 0.001, 0.131, 1.068, 1.001, 1.14, 2},
                {"B_TH_Avg_Wait_0_5", 0.013, 0.002, 0.024, 1.013, 1.002, 1.024, 2},
                {"D_TH_Avg_Wait_0_5", 0.016, 0.006, 0.026, 1.016, 1.006, 1.026, 2},
                {"B_LT_Std_Green_5_10", -0.138, -0.248, -0.04, 0.871, 0.78, 0.961, 2},
                {"C_TH_Avg_Wait_5_10", 0.017, 0.001, 0.032, 1.017, 1.001, 1.033, 1},
                {"B_Vol_LT_10_15", 0.029, 0.005, 0.054, 1.029, 1.005, 1.055, 1},
                {"D_TH_Avg_Green_10_15", -0.059, -0.103, -0.017, 0.943, 0.902, 0.983, 2},
                {"A_LT_Avg_Green_15_20", -0.055, -0.106, -0.006, 0.946, 0.899, 0.994, 2},
                {"A_LT_Std_Green_15_20", -0.090, -0.161, -0.019, 0.914, 0.851, 0.981, 2},
                {"C_LT_Avg_Queue_15_20", -0.094, -0.18, -0.013, 0.910, 0.835, 0.987, 2},
                {"D_TH_GreenRatio_15_20", -0.088, -0.175, -0.004, 0.916, 0.839, 0.996, 2},
                {"D_TH_Std_Green_15_20", 0.060, 0.004, 0.114, 1.062, 1.004, 1.121, 2},
                {"D_TH_Avg_Queue_15_20", -0.067, -0.13, -0.005, 0.935, 0.878, 0.995, 2},
            });

        r["within_slice1"] = build(
            "within_slice1", LocationClass::within, 1, 0.6759,
            {
                {"Avg_speed", -0.033, -0.063, -0.004, 0.968, 0.939, 0.996, 1},
                {"Std_speed", 0.056, 0.008, 0.101, 1.058, 1.008, 1.106, 1},
                {"B_Vol_LT", 0.034, 0.009, 0.063, 1.035, 1.009, 1.065, 2},
                {"B_TH_Avg_Wait", 0.013, 0.003, 0.022, 1.013, 1.003, 1.022, 2},
                {"C_Vol_Th", -0.006, -0.012, 0.000, 0.994, 0.988, 1.000, 1},
                {"D_TH_Avg_Wait", 0.009, 0.000, 0.017, 1.009, 1.000, 1.017, 2},
            });

        r["within_slice2"] = build(
            "within_slice2", LocationClass::within, 2, 0.6927,
            {
                {"A_Vol_Th", 0.005, 0.001, 0.011, 1.005, 1.001, 1.011, 1},
                {"B_Vol_LT", 0.039, 0.011, 0.07, 1.040, 1.011, 1.073, 2},
                {"B_LT_Std_Green", -0.106, -0.206, -0.017, 0.899, 0.814, 0.983, 2},
                {"B_TH_Avg_Queue", -0.046, -0.09, -0.005, 0.955, 0.914, 0.995, 1},
                {"D_Vol_LT", -0.036, -0.067, -0.004, 0.965, 0.935, 0.996, 1},
                {"D_OAFR", 0.518, 0.077, 0.978, 1.679, 1.08, 2.659, 2},
                {"D_TH_Avg_Wait", -0.011, -0.02, -0.002, 0.989, 0.98, 0.998, 2},
            });

        r["within_slice3"] = build(
            "within_slice3", LocationClass::within, 3, 0.6337,
            {
                {"B_Vol_LT", 0.031, 0.005, 0.058, 1.031, 1.005, 1.06, 2},
                {"D_TH_Avg_Green", -0.057, -0.099, -0.019, 0.945, 0.906, 0.981, 2},
                {"D_TH_Avg_Wait", 0.011, 0.001, 0.021, 1.011, 1.001, 1.021, 2},
            });

        r["within_slice4"] = build(
            "within_slice4", LocationClass::within, 4, 0.6858,
            {
                {"A_LT_Avg_Green", -0.041, -0.08, -0.003, 0.96, 0.923, 0.997, 1},
                {"A_LT_Std_Green", -0.064, -0.131, -0.004, 0.938, 0.877, 0.996, 2},
                {"B_Vol_LT", 0.036, 0.006, 0.066, 1.037, 1.006, 1.068, 2},
                {"B_TH_Avg_Queue", -0.052, -0.103, -0.008, 0.949, 0.902, 0.992, 2},
                {"C_LT_Avg_Queue", -0.076, -0.159, -0.003, 0.927, 0.853, 0.997, 2},
                {"D_Vol_LT", -0.039, -0.078, -0.004, 0.962, 0.925, 0.996, 2},
                {"D_TH_GreenRatio", -0.074, -0.145, -0.004, 0.929, 0.865, 0.996, 2},
                {"D_TH_Std_Green", 0.054, 0.006, 0.103, 1.055, 1.006, 1.108, 2},
            });

        r["entrance_full"] = build(
            "entrance_full", LocationClass::entrance, 0, 0.728,
            {
                {"A_TH_Avg_Queue_0_5", 0.054, 0.018, 0.094, 1.055, 1.018, 1.099, 2},
                {"A_LT_Avg_Green_5_10", -0.056, -0.107, -0.006, 0.946, 0.899, 0.994, 2},
                {"A_LT_Avg_Queue_5_10", -0.065, -0.128, -0.007, 0.937, 0.88, 0.993, 1},
                {"A_TH_Avg_Wait_5_10", 0.014, 0.000, 0.028, 1.014, 1.000, 1.028, 2},
                {"Avg_speed_10_15", -0.046, -0.078, -0.017, 0.955, 0.925, 0.983, 2},
                {"A_TH_Avg_Green_15_20", -0.037, -0.069, -0.009, 0.964, 0.933, 0.991, 2},
                {"A_LT_GreenRatio_15_20", -0.084, -0.167, -0.003, 0.919, 0.846, 0.997, 2},
            });

        r["entrance_slice1"] = build(
            "entrance_slice1", LocationClass::entrance, 1, 0.6679,
            {
                {"Avg_speed", -0.050, -0.077, -0.024, 0.951, 0.926, 0.976, 2},
                {"A_Vol_LT", -0.048, -0.086, -0.013, 0.953, 0.918, 0.987, 2},
                {"A_TH_Avg_Queue", 0.030, 0.001, 0.061, 1.030, 1.001, 1.063, 1},
            });

        r["entrance_slice2"] = build(
            "entrance_slice2", LocationClass::entrance, 2, 0.6770,
            {
                {"Avg_speed", -0.041, -0.072, -0.012, 0.96, 0.931, 0.988, 2},
                {"A_Vol_LT", -0.037, -0.07, -0.005, 0.964, 0.932, 0.995, 1},
                {"A_LT_Avg_Wait", -0.013, -0.022, -0.003, 0.987, 0.978, 0.997, 2},
                {"A_TH_GreenRatio", -0.040, -0.081, -0.002, 0.961, 0.922, 0.998, 2},
            });

        r["entrance_slice3"] = build(
            "entrance_slice3", LocationClass::entrance, 3, 0.6466,
            {
                {"Avg_speed", -0.038, -0.066, -0.01, 0.963, 0.936, 0.99, 2},
                {"A_Vol_LT", -0.046, -0.086, -0.01, 0.955, 0.918, 0.99, 2},
                {"A_TH_Std_Green", -0.035, -0.075, 0.0, 0.966, 0.928, 1.0, 2},
            });

        r["entrance_slice4"] = build(
            "entrance_slice4", LocationClass::entrance, 4, 0.6767,
            {
                {"Avg_speed", -0.037, -0.068, -0.006, 0.964, 0.934, 0.994, 2},
                {"A_Vol_LT", -0.047, -0.091, -0.009, 0.954, 0.913, 0.991, 2},
                {"A_LT_Avg_Green", -0.050, -0.096, -0.003, 0.951, 0.908, 0.997, 2},
                {"A_TH_Std_Green", -0.041, -0.077, -0.007, 0.960, 0.926, 0.993, 2},
            });

        return r;
    }();
    return models;
}

} // namespace

const FittedModel& load_paper_model(const std::string& name) {
    const auto& models = registry();
    const auto it = models.find(name);
    if (it == models.end()) throw_invalid("unknown reference model '" + name + "'");
    return it->second;
}

std::vector<std::string> paper_model_names() {
    std::vector<std::string> out;
    for (const auto& [name, model] : registry()) out.push_back(name);
    return out;
}

} // namespace ixrisk
