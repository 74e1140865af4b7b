/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_blockresult_free: (a: number, b: number) => void;
export const __wbg_loadedpipeline_free: (a: number, b: number) => void;
export const blockresult_cost: (a: number) => number;
export const blockresult_evaluated_nodes: (a: number) => number;
export const blockresult_leaves: (a: number) => [number, number];
export const blockresult_psnr: (a: number) => number;
export const blockresult_rate: (a: number) => number;
export const blockresult_tree_text: (a: number) => [number, number];
export const legal_split_names: (a: number, b: number, c: number) => [number, number, number, number];
export const loadedpipeline_new: (a: number, b: number, c: number, d: number) => [number, number, number];
export const loadedpipeline_partition: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number, j: number) => [number, number, number];
export const partition_exhaustive: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
export const partition_pruned: (a: number, b: number, c: number, d: number, e: number, f: number, g: number, h: number, i: number, j: number, k: number, l: number) => [number, number, number];
export const synthetic_image: (a: number, b: number, c: number) => [number, number, number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_start: () => void;
