// End-to-end library walkthrough on synthetic data: generate, train an
// emulator, fit the component basis, transform/project, then solve the
// inverse problem. Runs in a few seconds.

#include <iostream>

#include "eca/data_io.hpp"
#include "eca/eca.hpp"
#include "eca/mlp_train.hpp"

int main() {
    using namespace eca;

    const std::size_t d = 2;
    RudimentaryData data = gen_rudimentary(d, 4000, /*seed=*/123, /*vector_valued=*/true);
    auto [train_set, fit_set] = split(data.ds, 0.8, /*seed=*/0);

    MlpArchitecture arch;
    arch.hidden = {16, 16, 16, 16};
    MlpTrainOptions topts;
    topts.seed = 1;
    topts.epochs = 200;
    auto emulator = std::make_shared<const MlpEmulator>(
        train_mlp(train_set.x, train_set.y, arch, topts));
    std::cout << "emulator test R2: "
              << generalized_r2(emulator->forward(fit_set.x), fit_set.y) << "\n";

    EcaModel model(emulator);
    FitOptions fopts;
    fopts.seed = 123;
    model.fit(fit_set.x, fit_set.y, 1, fopts);
    std::cout << "v1 = (" << model.components()[0][0] << ", " << model.components()[0][1]
              << "), covered variance " << model.y_var()[0] << "\n";

    const Matrix t = model.transform(fit_set.x, 1);
    const Matrix x_proj = model.project(fit_set.x, 1);
    std::cout << "first point: t1 = " << t(0, 0) << ", projection = (" << x_proj(0, 0)
              << ", " << x_proj(0, 1) << ")\n";

    auto [t_prime, err] = model.inverse(fit_set.y, 1, InverseOptions{});
    double worst = 0.0;
    for (double e : err) worst = std::max(worst, e);
    std::cout << "inverse: recovered " << t_prime.rows
              << " score rows, worst per-row mse " << worst << "\n";
    return 0;
}
