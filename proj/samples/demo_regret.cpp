// Compares the Bayes mixture and NML on a three-expert family against the
// exhaustive worst-case label adversary.

#include <iostream>

#include "seqlog/seqlog.hpp"

int main() {
    using namespace seqlog;
    auto family = ExpertFamily::finite_static({{0.1, 0.5, 0.9}, {0.3, 0.3, 0.3}, {0.8, 0.6, 0.2}});
    Features xs;
    for (std::size_t t = 0; t < 12; ++t) xs.push_back({static_cast<double>(t % 3)});

    MixturePredictor bayes(pool_from_family(family));
    auto wc_bayes = worst_case_labels(bayes, hindsight_loss(family), xs);

    auto nml = nml_predict(SupOracle::finite_max(family), xs);
    auto wc_nml = worst_case_labels(nml, hindsight_loss(family), xs);

    std::cout << "T=" << xs.size() << " experts=" << family.size() << '\n'
              << "bayes worst-case regret " << format_double(wc_bayes.regret) << " (ln|H| = " << format_double(std::log(3.0)) << ")\n"
              << "nml   worst-case regret " << format_double(wc_nml.regret) << " (ln S = " << format_double(nml.table().root()) << ")\n";
}
