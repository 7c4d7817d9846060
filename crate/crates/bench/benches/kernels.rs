use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use kvshare_bench::{gaussian_tensor, gaussian_vector, layer_shape};
use kvshare_core::quant::{
    dequantize_k_into, dequantize_v_into, quantize_v_with, ValueQuantConfig,
};
use kvshare_core::{fwht_inplace, quantize_k, quantize_v, Codebook};

fn fwht(c: &mut Criterion) {
    let mut group = c.benchmark_group("fwht");
    for d in [64usize, 128, 1024] {
        let x = gaussian_vector(d, 1);
        group.throughput(Throughput::Elements(d as u64));
        group.bench_with_input(BenchmarkId::from_parameter(d), &x, |b, x| {
            let mut buf = x.clone();
            b.iter(|| {
                buf.copy_from_slice(x);
                fwht_inplace(black_box(&mut buf)).unwrap();
            })
        });
    }
    group.finish();
}

fn keys(c: &mut Criterion) {
    let shape = layer_shape(256);
    let t = gaussian_tensor(shape, 2);
    let block = quantize_k(&t).unwrap();
    let mut out = vec![0f32; shape.num_elements()];
    let mut group = c.benchmark_group("q8_0");
    group.throughput(Throughput::Elements(shape.num_elements() as u64));
    group.bench_function("quantize", |b| {
        b.iter(|| quantize_k(black_box(&t)).unwrap())
    });
    group.bench_function("dequantize", |b| {
        b.iter(|| dequantize_k_into(black_box(&block), &mut out))
    });
    group.finish();
}

fn values(c: &mut Criterion) {
    let shape = layer_shape(256);
    let t = gaussian_tensor(shape, 3);
    let cb = Codebook::gaussian_3bit();
    let mut out = vec![0f32; shape.num_elements()];
    let mut group = c.benchmark_group("value_3bit");
    group.throughput(Throughput::Elements(shape.num_elements() as u64));
    group.bench_function("quantize", |b| {
        b.iter(|| quantize_v(black_box(&t), &cb).unwrap())
    });
    for packed in [false, true] {
        let config = ValueQuantConfig {
            packed,
            ..Default::default()
        };
        let block = quantize_v_with(&t, &cb, config).unwrap();
        let name = if packed {
            "dequantize_packed"
        } else {
            "dequantize_bytes"
        };
        group.bench_function(name, |b| {
            b.iter(|| dequantize_v_into(black_box(&block), &cb, &mut out).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, fwht, keys, values);
criterion_main!(benches);
