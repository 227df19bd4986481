"""Fit a small invariant network to predict another network's output at a fixed probe point."""

from monomial_nfn.nfn import ToyConfig, train_toy


def main():
    result = train_toy(ToyConfig(steps=150), log=print)
    d = result.to_dict()
    print(f"{d['num_parameters']} parameters, loss {d['initial_loss']:.4f} -> {d['final_loss']:.4f}, "
          f"test mse {d['test_mse']:.4f}")
    print(f"prediction change under random positive rescaling: {d['augmented_max_rel_dev']:.1e}")


if __name__ == "__main__":
    main()
