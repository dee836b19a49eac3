/* tslint:disable */
/* eslint-disable */

export class JacobiTraceView {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly converged: boolean;
    readonly residuals: Float64Array;
    readonly rho_abs_r_alpha: number;
    readonly rho_r: number;
}

export function densityCurve(alpha: number, beta: number, gamma: number, delta: number, x_min: number, x_max: number, n: number): Float64Array;

export function jacobiTrace(coupling: number, alpha: number): JacobiTraceView;

export function sumParams(a: Float64Array, b: Float64Array): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_jacobitraceview_free: (a: number, b: number) => void;
    readonly densityCurve: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number, number];
    readonly jacobiTrace: (a: number, b: number) => [number, number, number];
    readonly jacobitraceview_converged: (a: number) => number;
    readonly jacobitraceview_residuals: (a: number) => [number, number];
    readonly jacobitraceview_rho_abs_r_alpha: (a: number) => number;
    readonly jacobitraceview_rho_r: (a: number) => number;
    readonly sumParams: (a: number, b: number, c: number, d: number) => [number, number, number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
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
