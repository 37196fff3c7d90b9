// Injection entry point: installs the shim on the real page window at
// document start. Bundled to dist/shim.js and vendored into the render
// harness package.
import { installReadinessShim, type ShimWindow } from './shim';

installReadinessShim(window as unknown as ShimWindow);
