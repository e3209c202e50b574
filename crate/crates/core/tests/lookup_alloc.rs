//! The precomputed-index lookups must not touch the heap.

mod common;

use std::alloc::{GlobalAlloc, Layout, System};
use std::sync::atomic::{AtomicUsize, Ordering};

use common::{random_tensor, rng};
use scalestereo::{build_pyramid, LookupConfig, LookupPlan, Tensor};

struct Counting;

static ALLOCS: AtomicUsize = AtomicUsize::new(0);

unsafe impl GlobalAlloc for Counting {
    unsafe fn alloc(&self, layout: Layout) -> *mut u8 {
        ALLOCS.fetch_add(1, Ordering::SeqCst);
        System.alloc(layout)
    }

    unsafe fn dealloc(&self, ptr: *mut u8, layout: Layout) {
        System.dealloc(ptr, layout)
    }

    unsafe fn realloc(&self, ptr: *mut u8, layout: Layout, new_size: usize) -> *mut u8 {
        ALLOCS.fetch_add(1, Ordering::SeqCst);
        System.realloc(ptr, layout, new_size)
    }
}

#[global_allocator]
static GLOBAL: Counting = Counting;

#[test]
fn lookups_into_buffers_do_not_allocate() {
    let (h, w) = (8, 32);
    let mut r = rng(5);
    let c1 = random_tensor(&mut r, &[h, w, w], -1.0, 1.0);
    let d = random_tensor(&mut r, &[h, w], 0.0, 20.0);
    let cfg = LookupConfig::default();
    let pyr = build_pyramid(c1, cfg.num_levels).unwrap();
    let plan = LookupPlan::new(&cfg, (h, w)).unwrap();
    let mut pl = Tensor::zeros(&[h, w, plan.pyramid_width()]);
    let mut sl = Tensor::zeros(&[h, w, plan.scale_width()]);

    let before = ALLOCS.load(Ordering::SeqCst);
    for _ in 0..32 {
        plan.pyramid_lookup_into(&pyr, &d, &mut pl).unwrap();
        plan.scale_lookup_into(pyr.finest(), &d, &mut sl).unwrap();
    }
    let after = ALLOCS.load(Ordering::SeqCst);
    assert_eq!(after - before, 0);

    // The direct path materializes index tensors on every call.
    let before = ALLOCS.load(Ordering::SeqCst);
    let _ = scalestereo::pyramid_lookup(&pyr, &d, &cfg).unwrap();
    assert!(ALLOCS.load(Ordering::SeqCst) > before);
}
