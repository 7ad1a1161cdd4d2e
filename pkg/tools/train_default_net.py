"""Train the bundled allocation network and freeze it under src/vpquad/data/.

Data comes from the tip-loss-free rotor model on the default calibrated
geometry with the cambered polar.  Hidden width is picked by the
validation-elbow rule, then the selected width is retrained on the full
dataset.  Deterministic for the fixed seed.

Run from the repo root:  python tools/train_default_net.py
"""

import pathlib
import time

from vpquad import allocnet, params, rotor
from vpquad.airfoil import bundled_polar

OUT = pathlib.Path(__file__).resolve().parents[1] / "src" / "vpquad" / "data" / "alloc_net.txt"
SEED = 0


def main():
    t0 = time.time()
    cam = bundled_polar("cambered")
    geom = rotor.default_geometry()
    dataset = allocnet.generate_dataset(geom, cam)
    print("dataset: %d samples (%d skipped)" % (len(dataset), dataset.skipped_cells))

    count, scores = allocnet.select_hidden_count(dataset, seed=SEED)
    for c in sorted(scores):
        print("  hidden %2d: validation RMSE %.3f rad/s" % (c, scores[c]))
    print("selected hidden count: %d" % count)

    result = allocnet.train(dataset, count, max_epochs=400, seed=SEED)
    rmse = allocnet.evaluate_rmse(result.net, dataset)
    mean_omega = dataset.omega.mean()
    print("full-data RMSE: %.3f rad/s (%.3f%% of mean %.0f RPM)"
          % (rmse, 100.0 * rmse / mean_omega, mean_omega * params.RADS_TO_RPM))
    print("epochs: %d, final normalized MSE: %.3e, converged: %s"
          % (result.epochs, result.mse_history[-1], result.converged))

    allocnet.save_net(result.net, OUT)
    reloaded = allocnet.load_net(OUT)
    assert (reloaded.w1 == result.net.w1).all(), "round trip must be bit exact"
    print("wrote %s  (%.1fs)" % (OUT, time.time() - t0))


if __name__ == "__main__":
    main()
