/* tslint:disable */
/* eslint-disable */

/**
 * Channeling efficiency over `points` size parameters, interleaved as
 * `[x0, eta0, x1, eta1, ...]`.
 */
export function efficiency_curve(n1: number, x_min: number, x_max: number, points: number, orientation: string): Float64Array;

/**
 * Hanbury Brown and Twiss histogram of a simulated single emitter split
 * onto two detectors, interleaved as `[tau0, g0, tau1, g1, ...]` with `tau`
 * in nanoseconds. The last element is the zero-delay dip.
 */
export function g2_demo(excitation_rate: number, lifetime_ns: number, background: number, duration: number, seed: bigint): Float64Array;

/**
 * Azimuthally integrated radiation pattern `dP/dθ` for a surface dipole,
 * interleaved as `[θ0, p0, θ1, p1, ...]` with `θ` in radians.
 */
export function polar_pattern(n1: number, x: number, orientation: string): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly efficiency_curve: (a: number, b: number, c: number, d: number, e: number, f: number) => [number, number, number, number];
    readonly g2_demo: (a: number, b: number, c: number, d: number, e: bigint) => [number, number, number, number];
    readonly polar_pattern: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
