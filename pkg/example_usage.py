"""
Example usage of the besovflow services
Demonstrates the library calls behind the command-line claims
"""
import numpy as np

from services.euler import dt_pressure_identity_check, pressure_time_regularity, run_euler
from services.grid import Grid, transform
from services.interp import HilbertCouple, interp_norm, k_profile
from services.norms import BesovParams, besov_seminorm, mollification_scan
from services.pressure import pressure, pressure_blocks, pressure_exponent
from services.scaling import fit_exponent
from services.synth import RoughFieldSpec, SpaceTimeSeries, generate, taylor_green
from utils.error_handlers import BesovFlowError


def example_1_besov_seminorm():
    """Both seminorm estimators on a lacunary field"""
    print("\n=== Example 1: Besov seminorms ===")
    grid = Grid((128, 128))
    f = generate(RoughFieldSpec(0.4, 'lacunary', 5, 1, False), grid)
    for estimator in ('littlewood_paley', 'difference'):
        value = besov_seminorm(f, BesovParams(0.4, 2.0, estimator=estimator))
        print(f"[f]_B^0.4 ({estimator}): {value:.4f}")


def example_2_mollification():
    """Fitted slopes of the three mollification estimates"""
    print("\n=== Example 2: Mollification scan ===")
    grid = Grid((256, 256))
    f = generate(RoughFieldSpec(0.5, 'lacunary', 6, 0, False), grid)
    scans = mollification_scan(f, [2.0 ** -k for k in range(2, 8)])
    for name, scan in scans.items():
        slope, stderr = fit_exponent(scan, None)
        print(f"{name}: slope {slope:.3f} ± {stderr:.3f}")


def example_3_interpolation():
    """K-functional profile and interpolation norm of one mode"""
    print("\n=== Example 3: Interpolation norm ===")
    grid = Grid((32, 32))
    x = transform(generate(RoughFieldSpec(0.5, 'lacunary', 0, 0, False), grid))
    couple = HilbertCouple(0.0, 2.0)
    profile = k_profile(x, couple, np.logspace(-3, 3, 13))
    print(f"K(1e-3) = {profile.K_values[0]:.3e}, K(1e3) = {profile.K_values[-1]:.3e}")
    print(f"Shape checks: {profile.check()}")
    print(f"(L^2, H^2)_(1/2, 2) norm: {interp_norm(x, couple, 0.5, 2.0):.4f}")


def example_4_pressure():
    """Pressure of Taylor-Green and of a rough velocity"""
    print("\n=== Example 4: Pressure ===")
    grid = Grid((128, 128))
    p = pressure(taylor_green(grid))
    print(f"Taylor-Green pressure range: [{p.data.min():.3f}, {p.data.max():.3f}]")
    u = generate(RoughFieldSpec(0.4, 'lacunary', 4, 2, True), grid)
    print(f"Fitted spatial exponent of p: {pressure_exponent(pressure(u), 2.0, pressure_blocks(4))}")


def example_5_time_regularity():
    """Time exponent of a synthetic series and the ∂t p identity on a short run"""
    print("\n=== Example 5: Time regularity ===")
    grid = Grid((32, 32))
    report = pressure_time_regularity(SpaceTimeSeries(grid, 0.5, levels=10, seed=4), 'i')
    print(f"Claim (i): exponent {report.fitted['exponent']:.3f}, floor {report.floor}, pass={report.passed}")

    transported = SpaceTimeSeries(Grid((128, 128)), 0.7, seed=2, kind='transported')
    report = pressure_time_regularity(transported, 'iii')
    print(f"Claim (iii): exponent {report.fitted['exponent']:.3f}, floor {report.floor}, pass={report.passed}")

    u0 = generate(RoughFieldSpec(0.5, 'power-spectrum', 0, 7, True, 0.1), grid)
    run = run_euler(u0, 2e-3, 0.032)
    identity = dt_pressure_identity_check(run)
    print(f"∂t p identity ratios: {identity.fitted['ratios']}, pass={identity.passed}")


def main():
    """Run all examples"""
    print("\n" + "="*60)
    print("📐 besovflow - Usage Examples")
    print("="*60)

    try:
        example_1_besov_seminorm()
        example_2_mollification()
        example_3_interpolation()
        example_4_pressure()
        example_5_time_regularity()
    except BesovFlowError as e:
        print(f"\n❌ Error: {e.message}")

    print("\n" + "="*60)
    print("✅ Examples Complete!")
    print("="*60)


if __name__ == "__main__":
    main()
