// Worked example: sample a paired image/voxel dataset from the generative
// process, fit the model, reconstruct the held-out images from their voxel
// vectors alone, and score the result. Mirrors what the CLI does, but
// in-process.

#include <cstdio>

#include "dgmm/dgmm.hpp"

using namespace dgmm;

int main() {
  // A small linear-map world: 8x8 images from K=3 shared factors, 120
  // voxels with their own private structure on top.
  SyntheticConfig world;
  world.n_train = 300;
  world.n_test = 40;
  world.d1 = 64;
  world.d2 = 120;
  world.k = 3;
  world.kbar = 3;
  world.image_width = 8;
  world.image_height = 8;
  world.voxel_noise_precision = 10.0;
  world.seed = 7;
  auto [data, truth] = generate_synthetic(world);

  TrainConfig fit;
  fit.k = 3;
  fit.kbar = 3;
  fit.recog_hidden = {32};
  fit.epochs = 250;
  fit.seed = 1;
  const TrainResult model = train(data, fit);
  std::printf("training: %zu epochs, status %s, <gamma> %.2f\n",
              model.log.size(), to_string(model.status),
              model.vb.gamma_mean());

  // Latent codes of the training images anchor the kNN regularizer.
  const Matrix x_train = data.x_train();
  const RecognitionOutput codes = forward_recognition(model.recog, x_train);

  ReconstructOptions how;
  how.knn = 10;
  how.rho = 0.25;
  how.mc_samples = 32;
  const Predictor decoder(model.gen, model.vb.q_b.mean, model.vb.q_h.mean,
                          model.vb.gamma_mean(), codes.mu_z, data.y_train(),
                          how);
  const Matrix recon = decoder.reconstruct_all(data.y_test(), 5);

  const MetricReport scores = evaluate_reconstructions(
      data.x_test(), recon, world.image_width, world.image_height,
      data.x_test().maxCoeff() - data.x_test().minCoeff());
  std::printf("held-out reconstruction:\n%s", scores.summary().c_str());
  return 0;
}
