//! Explicit Runge–Kutta schemes on flat state vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ButcherTableau {
    pub name: &'static str,
    pub order: usize,
    /// Strictly lower triangular stage matrix, row `i` has `i` entries.
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
}

impl ButcherTableau {
    pub fn stages(&self) -> usize {
        self.b.len()
    }

    /// Number of stages actually needed for the update (trailing stages
    /// with zero weight are skipped).
    pub fn active_stages(&self) -> usize {
        self.b.iter().rposition(|&w| w != 0.0).map_or(0, |i| i + 1)
    }
}

/// The classical fourth-order method.
pub fn rk4_tableau() -> ButcherTableau {
    ButcherTableau {
        name: "rk4",
        order: 4,
        a: vec![vec![], vec![0.5], vec![0.0, 0.5], vec![0.0, 0.0, 1.0]],
        b: vec![1.0 / 6.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 6.0],
        c: vec![0.0, 0.5, 0.5, 1.0],
    }
}

/// Verner's "most efficient" 9(8) pair, ninth-order weights. The sixteenth
/// stage only feeds the embedded estimate and carries zero weight.
#[allow(clippy::excessive_precision)]
pub fn verner9_tableau() -> ButcherTableau {
    let a: Vec<Vec<f64>> = vec![
        vec![],
        vec![0.3571e-1],
        vec![-3.833_735_636_677_017e-2, 0.137_397_637_279_444_32],
        vec![3.714_760_534_225_28e-2, 0.0, 0.111_442_816_026_758_42],
        vec![2.674_764_429_871_505, 0.0, -9.982_382_134_885_293, 7.921_017_705_013_789],
        vec![5.242_104_050_577_351e-2, 0.0, 0.0, 0.179_691_118_917_595_32, 6.237_879_371_938_568e-4],
        vec![
            0.159_249_222_364_763_22, 0.0, 0.0, -0.429_842_987_724_108_7, 6.665_266_542_726_088e-2,
            0.757_805_152_571_522,
        ],
        vec![7.283_333_333_333_333e-2, 0.0, 0.0, 0.0, 0.0, 0.335_934_459_066_510_37, 0.246_732_207_600_156_3],
        vec![
            0.729755859375e-1, 0.0, 0.0, 0.0, 0.0, 0.334_800_972_969_933_33, 0.118_415_823_905_066_65,
            -0.345673828125e-1,
        ],
        vec![
            4.911_213_663_452_096_4e-2, 0.0, 0.0, 0.0, 0.0, 3.983_857_361_308_652e-2, 0.106_967_528_893_935_49,
            -2.174_259_165_458_647_7e-2, -0.105_595_647_486_956_49,
        ],
        vec![
            -2.707_988_818_641_280_5e-2, 0.0, 0.0, 0.0, 0.0, 0.333e-1, -0.164_552_607_003_605_72,
            3.428_266_306_497_39e-2, 0.158_526_406_443_922_1, 0.218_523_425_681_122_5,
        ],
        vec![
            5.584_657_769_108_862_5e-2, 0.0, 0.0, 0.0, 0.0, 9.166_533_166_672_539e-2, 0.239_239_965_552_362_7,
            1.023_834_712_248_415e-2, -2.679_331_322_859_542_6e-3, 4.235_624_181_474_284_5e-2,
            0.225_397_047_016_660_4,
        ],
        vec![
            -0.480_251_051_272_519_6, 0.0, 0.0, 0.0, 0.0, -6.359_610_162_555_930_5, -0.276_231_389_804_084_1,
            -6.500_796_633_979_847, 0.573_476_587_704_095_7, 1.347_125_994_868_138_9, 5.936_840_409_706_221,
            6.590_346_245_333_925,
        ],
        vec![
            0.330_753_306_767_140_1, 0.0, 0.0, 0.0, 0.0, 5.956_207_776_829_962, -0.486_831_640_048_152_77,
            4.462_055_288_206_771, 0.741_025_823_144_207_2, -0.711_819_203_457_591_3, -5.454_619_594_516_665,
            -4.140_803_729_244_71, 0.203_831_972_319_038_66,
        ],
        vec![
            -0.584_711_112_299_894_5, 0.0, 0.0, 0.0, 0.0, -12.412_684_171_162_67, 1.360_245_445_660_928,
            -22.426_105_311_118_683, -0.882_885_705_586_545_8, 1.770_155_128_538_230_4, 12.158_096_519_185_339,
            22.230_375_204_077_607, -0.663_448_376_020_124_9, 0.450_962_378_725_813_74,
        ],
        vec![
            1.940_575_549_810_648_7, 0.0, 0.0, 0.0, 0.0, 21.977_984_081_145_564, 0.823_074_732_698_472_9,
            68.164_416_836_263_54, -3.117_097_463_620_267, -4.568_841_021_822_44, -18.741_909_871_262_65,
            -66.577_118_396_378_32, 1.098_915_553_165_441_8, 0.0, 0.0,
        ],
    ];
    let b = vec![
        1.500_669_014_979_724_7e-2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.055_180_992_746_381_3,
        0.238_494_726_378_218_3, 0.128_815_177_428_299_15, 0.227_662_311_104_621_57, 1.229_532_587_437_517_4,
        4.624_976_662_810_384e-2, 0.138_619_631_936_629_38, 3.080_010_168_319_435_5e-2, 0.0,
    ];
    let c = vec![
        0.0, 0.3571e-1, 9.906_028_091_267_415e-2, 0.148_590_421_369_011_2, 0.6134, 0.232_735_947_360_562_7,
        0.553_864_052_639_437_3, 0.6555, 0.491625, 0.6858e-1, 0.253, 0.662_064_179_541_204_6, 0.8309, 0.8998,
        1.0, 1.0,
    ];
    ButcherTableau { name: "verner9", order: 9, a, b, c }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    Rk4,
    Verner9,
}

impl Scheme {
    pub fn tableau(self) -> ButcherTableau {
        match self {
            Scheme::Rk4 => rk4_tableau(),
            Scheme::Verner9 => verner9_tableau(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeIntegrator {
    pub scheme: Scheme,
    pub dt: f64,
}

impl TimeIntegrator {
    pub fn new(scheme: Scheme, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::Config(format!("time step {dt} must be positive")));
        }
        Ok(Self { scheme, dt })
    }

    /// Uniform steps covering `[t0, t1]`, each at most `dt` (up to rounding).
    pub fn steps(&self, t0: f64, t1: f64) -> Result<(usize, f64)> {
        if !(t1 >= t0) {
            return Err(Error::Config(format!("final time {t1} before start {t0}")));
        }
        if t1 == t0 {
            return Ok((0, self.dt));
        }
        let n = ((t1 - t0) / self.dt - 1e-9).ceil().max(1.0) as usize;
        Ok((n, (t1 - t0) / n as f64))
    }
}

/// One explicit step of `y' = f(t, y)` in place. `f(t, y, dy)` writes the
/// derivative into `dy`.
pub fn rk_step<F>(tab: &ButcherTableau, t: f64, dt: f64, y: &mut [f64], mut f: F) -> Result<()>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = y.len();
    let s = tab.active_stages();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(s);
    let mut stage = vec![0.0; n];
    for i in 0..s {
        stage.copy_from_slice(y);
        for (j, &aij) in tab.a[i].iter().enumerate() {
            if aij != 0.0 {
                let kj = &k[j];
                let h = dt * aij;
                for (st, kv) in stage.iter_mut().zip(kj) {
                    *st += h * kv;
                }
            }
        }
        let mut ki = vec![0.0; n];
        f(t + tab.c[i] * dt, &stage, &mut ki)?;
        k.push(ki);
    }
    for (i, ki) in k.iter().enumerate() {
        let bi = tab.b[i];
        if bi != 0.0 {
            let h = dt * bi;
            for (yv, kv) in y.iter_mut().zip(ki) {
                *yv += h * kv;
            }
        }
    }
    Ok(())
}
