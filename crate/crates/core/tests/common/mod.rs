//! Shared scaffolding for the integration tests: lighting pools, the
//! ground-truth oracle backend and the texture-recovery experiment.

#![allow(dead_code)]

use std::sync::{Arc, OnceLock};
use std::time::Instant;

use relitex_core::envlight::procedural::studio_pool;
use relitex_core::envlight::{PrefilterSettings, PrefilteredLight};
use relitex_core::field::{bake_uv, BakedMaterial, FieldConfig, MaterialMaps, TextureField};
use relitex_core::geometry::primitives::uv_sphere;
use relitex_core::geometry::Mesh;
use relitex_core::guidance::StubBackend;
use relitex_core::image::{psnr, tonemap, Image};
use relitex_core::pipeline::{
    backproject_baseline, optimize, render_canonical, stage1_reference, CanonicalSetup, LogRow, OptimConfig, Prompt,
    ReferenceSet, Scene, SyntheticMaterial,
};
use relitex_core::renderer::{render, MaterialField};

pub const PROMPT: &str = "a medieval steel helmet";

pub fn sphere() -> Mesh {
    uv_sphere(64, 32)
}

/// Prefiltered studio pool with the default settings; entry 0 is the
/// canonical light.
pub fn pool() -> Vec<PrefilteredLight> {
    static POOL: OnceLock<Vec<PrefilteredLight>> = OnceLock::new();
    POOL.get_or_init(|| {
        let settings = PrefilterSettings::default();
        let first = PrefilteredLight::build(&studio_pool(128)[0], &settings);
        let lut = Arc::clone(&first.maps().brdf_lut);
        let mut pool = vec![first];
        for env in &studio_pool(128)[1..] {
            pool.push(PrefilteredLight::build_with_lut(env, &settings, Arc::clone(&lut)));
        }
        pool
    })
    .clone()
}

/// The held-out light: canonical light rotated by +90 degrees and scaled by
/// 1.3.
pub fn held_out(pool: &[PrefilteredLight]) -> PrefilteredLight {
    pool[0].transformed(std::f64::consts::FRAC_PI_2, 1.3)
}

/// Stub whose point-mass target is the ground truth rendered (and tone
/// mapped) from the requested view.
pub fn oracle(mesh: Mesh, truth: SyntheticMaterial) -> StubBackend {
    StubBackend::oracle(move |v| {
        tonemap(&render(&mesh, &truth, &v.light, &v.camera).expect("oracle render").image)
    })
}

/// Mean PSNR over the covered pixels of the tone-mapped renders.
pub fn view_psnr(
    mesh: &Mesh,
    a: &dyn MaterialField,
    b: &dyn MaterialField,
    light: &PrefilteredLight,
    setup: &CanonicalSetup,
) -> f64 {
    let ra = render_canonical(mesh, a, light, setup).unwrap();
    let rb = render_canonical(mesh, b, light, setup).unwrap();
    let vals: Vec<f64> = ra
        .iter()
        .zip(&rb)
        .map(|(x, y)| psnr(&tonemap(&x.image), &tonemap(&y.image), Some(&x.mask)))
        .collect();
    vals.iter().sum::<f64>() / vals.len() as f64
}

pub struct Recovery {
    pub mesh: Mesh,
    pub setup: CanonicalSetup,
    pub refs: ReferenceSet,
    pub field: TextureField,
    pub log: Vec<LogRow>,
    pub seconds: f64,
    pub psnr_canonical: f64,
    pub psnr_held_out: f64,
    pub baseline_held_out: f64,
    pub baseline_coverage: f64,
}

pub fn run_recovery(resolution: usize, config: &OptimConfig) -> Recovery {
    let mesh = sphere();
    let truth = SyntheticMaterial::default();
    let pool = pool();
    let setup = CanonicalSetup::new(&mesh, pool[0].clone(), resolution).unwrap();
    let backend = oracle(mesh.clone(), truth);
    let prompt = Prompt::new(PROMPT);
    let start = Instant::now();
    let refs = stage1_reference(&mesh, &prompt, &setup, &backend, config.seed).unwrap();
    let scene = Scene {
        mesh: &mesh,
        setup: &setup,
        pool: &pool,
        references: Some(&refs),
    };
    let field = TextureField::new(FieldConfig::default(), config.seed);
    let out = optimize(scene, &prompt, config, &backend, field, |_, _| {}).unwrap();
    let seconds = start.elapsed().as_secs_f64();
    let held = held_out(&pool);
    let psnr_canonical = view_psnr(&mesh, &out.field, &truth, &pool[0], &setup);
    let psnr_held_out = view_psnr(&mesh, &out.field, &truth, &held, &setup);
    let baseline = backproject_baseline(&mesh, &refs, &setup, 512).unwrap();
    let baked = BakedMaterial::new(baseline.maps);
    let baseline_held_out = view_psnr(&mesh, &baked, &truth, &held, &setup);
    Recovery {
        mesh,
        setup,
        refs,
        field: out.field,
        log: out.log,
        seconds,
        psnr_canonical,
        psnr_held_out,
        baseline_held_out,
        baseline_coverage: baseline.coverage,
    }
}

pub fn bake(mesh: &Mesh, field: &dyn MaterialField, res: usize) -> MaterialMaps {
    bake_uv(mesh, field, res).unwrap()
}

pub fn same_image(a: &Image, b: &Image) -> bool {
    a.same_shape(b) && a.data.iter().zip(&b.data).all(|(x, y)| x.to_bits() == y.to_bits())
}
