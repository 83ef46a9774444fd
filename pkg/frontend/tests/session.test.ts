// Deterministic replay of an editing session against a mocked server.
import { describe, expect, it } from 'vitest';

import { ApiClient, FetchLike } from '../src/api.js';
import {
    EditorSession,
    LatestWins,
    changedFrameMask,
    differenceStrip,
    exportClipJson,
    importClipJson,
    radToDeg,
    sliderSeeds,
} from '../src/state.js';

const FRAMES = 30;
const J = 3;

function makeFrames(offset: number): number[][] {
    const frames: number[][] = [];
    for (let t = 0; t < FRAMES; t++) {
        const row: number[] = [];
        for (let j = 0; j < J * 3; j++) {
            row.push(offset + t * 0.01 + j * 0.001);
        }
        frames.push(row);
    }
    return frames;
}

const clipFrames = makeFrames(0);
const legsSeries = Array.from({ length: FRAMES }, (_, t) => 2.0 + 0.01 * t);
const spineSeries = Array.from({ length: FRAMES }, (_, t) => 0.2 + 0.005 * t);

// edited frames differ from originals only inside [peak-3, peak+3]
const PEAK = 10;
const RADIUS = 3;
const editedFrames = clipFrames.map((row, t) =>
    Math.abs(t - PEAK) <= RADIUS ? row.map((v) => v + 0.05) : row.slice()
);

const responses: Record<string, unknown> = {
    'GET /api/metrics': [
        { name: 'legs_spread', required_roles: ['pelvis', 'rknee', 'lknee'], mean: 2.3, std: 0.2, trained: true },
        { name: 'shoulders_openness', required_roles: ['spine1', 'rshoulder', 'lshoulder'], mean: 2.0, std: 0.1, trained: false },
        { name: 'spine_flexion', required_roles: ['neck', 'pelvis'], mean: 0.3, std: 0.1, trained: true },
    ],
    'GET /api/clips': [{ id: 'walk-01', frames: FRAMES, frame_rate: 30 }],
    'GET /api/clips/walk-01': {
        id: 'walk-01',
        frame_rate: 30,
        J,
        parents: [-1, 0, 1],
        frames: clipFrames,
        metrics: { legs_spread: legsSeries, spine_flexion: spineSeries },
    },
    'POST /api/edit/pose': {
        pose: clipFrames[PEAK].map((v) => v + 0.02),
        readouts: [{ name: 'legs_spread', before: legsSeries[PEAK], after: 2.31 }],
    },
    'POST /api/edit/clip': {
        id: 'walk-01-edited',
        frame_rate: 30,
        curve: changedFrameMask(FRAMES, PEAK, RADIUS).map((inside, t) =>
            inside ? Math.max(0, 1 - Math.abs(t - PEAK) / RADIUS) : 0
        ),
        frames: editedFrames,
        readouts: [{ name: 'legs_spread', before: legsSeries, after: legsSeries.map((v) => v + 0.02) }],
    },
};

interface RecordedCall {
    key: string;
    body: unknown;
}

function mockServer(calls: RecordedCall[], delays: Record<string, Promise<void>> = {}): FetchLike {
    return async (url, init) => {
        const method = init?.method ?? 'GET';
        const key = `${method} ${url}`;
        calls.push({ key, body: init?.body ? JSON.parse(String(init.body)) : null });
        if (delays[key]) await delays[key];
        const payload = responses[key];
        if (payload === undefined) {
            return new Response(JSON.stringify({ code: 404, message: `no route ${key}` }), {
                status: 404,
            });
        }
        return new Response(JSON.stringify(payload), { status: 200 });
    };
}

async function startSession(calls: RecordedCall[] = []): Promise<EditorSession> {
    const session = new EditorSession(new ApiClient('', mockServer(calls)));
    await session.start();
    await session.selectClip('walk-01');
    return session;
}

describe('slider seeding', () => {
    it('initial slider values equal the server-reported metrics at the playhead', async () => {
        const session = await startSession();
        expect(session.state.sliders['legs_spread']).toBe(legsSeries[0]);
        expect(session.state.sliders['spine_flexion']).toBe(spineSeries[0]);
        session.setPlayhead(PEAK);
        expect(session.state.sliders['legs_spread']).toBe(legsSeries[PEAK]);
        expect(session.state.sliders['spine_flexion']).toBe(spineSeries[PEAK]);
    });

    it('only trained metrics receive sliders', async () => {
        const session = await startSession();
        expect(Object.keys(session.state.sliders).sort()).toEqual([
            'legs_spread',
            'spine_flexion',
        ]);
    });

    it('scrubbing reseeds and clears dirty state', async () => {
        const session = await startSession();
        session.setSlider('legs_spread', 2.5);
        expect(session.state.dirty.has('legs_spread')).toBe(true);
        session.setPlayhead(5);
        expect(session.state.dirty.size).toBe(0);
        expect(session.state.sliders['legs_spread']).toBe(legsSeries[5]);
    });
});

describe('pose preview', () => {
    it('two moved sliders produce a single request with two targets', async () => {
        const calls: RecordedCall[] = [];
        const session = await startSession(calls);
        session.setPlayhead(PEAK);
        session.setSlider('legs_spread', 2.4);
        session.setSlider('spine_flexion', 0.25);
        await session.previewPose();
        const editCalls = calls.filter((c) => c.key === 'POST /api/edit/pose');
        expect(editCalls.length).toBe(1);
        const body = editCalls[0].body as { pose: number[]; targets: unknown[] };
        expect(body.targets).toEqual([
            { metric: 'legs_spread', value: 2.4 },
            { metric: 'spine_flexion', value: 0.25 },
        ]);
        expect(body.pose).toEqual(clipFrames[PEAK]);
    });

    it('readouts come from the server response, not local math', async () => {
        const session = await startSession();
        session.setSlider('legs_spread', 2.4);
        await session.previewPose();
        expect(session.state.lastPoseEdit?.readouts[0].after).toBe(2.31);
    });

    it('untouched sliders send no targets', async () => {
        const calls: RecordedCall[] = [];
        const session = await startSession(calls);
        await session.previewPose();
        expect(calls.filter((c) => c.key === 'POST /api/edit/pose').length).toBe(0);
    });
});

describe('latest-wins debounce', () => {
    it('keeps one request in flight and only the newest pending', async () => {
        const order: string[] = [];
        const gate = new LatestWins();
        let release!: () => void;
        const blocked = new Promise<void>((resolve) => (release = resolve));
        const first = gate.submit(async () => {
            order.push('first:start');
            await blocked;
            order.push('first:end');
        });
        const second = gate.submit(async () => {
            order.push('second');
        });
        const third = gate.submit(async () => {
            order.push('third');
        });
        expect(gate.busy).toBe(true);
        release();
        await Promise.all([first, second, third]);
        // the second submission was superseded by the third before running
        expect(order).toEqual(['first:start', 'first:end', 'third']);
    });
});

describe('apply to clip', () => {
    it('marks exactly the frames inside [peak - 3, peak + 3] as changed', async () => {
        const session = await startSession();
        session.setPlayhead(PEAK);
        session.setSlider('legs_spread', 2.4);
        await session.applyToClip();
        const mask = session.changedFrames();
        const marked = mask
            .map((m, t) => (m ? t : -1))
            .filter((t) => t >= 0);
        expect(marked).toEqual([7, 8, 9, 10, 11, 12, 13]);
    });

    it('difference strip is zero outside the curve window', async () => {
        const session = await startSession();
        session.setPlayhead(PEAK);
        session.setSlider('legs_spread', 2.4);
        await session.applyToClip();
        const strip = differenceStrip(
            clipFrames,
            session.state.lastClipEdit!.frames,
            session.changedFrames()
        );
        for (let t = 0; t < FRAMES; t++) {
            if (Math.abs(t - PEAK) > RADIUS) {
                expect(strip[t]).toBe(0);
            }
        }
        expect(strip[PEAK]).toBeGreaterThan(0);
    });

    it('the mask reflects the applied edit, not later scrubbing', async () => {
        const session = await startSession();
        session.setPlayhead(PEAK);
        session.setSlider('legs_spread', 2.4);
        await session.applyToClip();
        session.setPlayhead(2);
        const marked = session
            .changedFrames()
            .map((m, t) => (m ? t : -1))
            .filter((t) => t >= 0);
        expect(marked).toEqual([7, 8, 9, 10, 11, 12, 13]);
    });
});

describe('export / import', () => {
    it('exported clip re-imports with identical frames', async () => {
        const session = await startSession();
        session.setPlayhead(PEAK);
        session.setSlider('legs_spread', 2.4);
        await session.applyToClip();
        const text = session.exportEditedClip();
        expect(text).not.toBeNull();
        const back = importClipJson(text!);
        expect(back.frames).toEqual(editedFrames);
        expect(back.frame_rate).toBe(30);
        expect(back.id).toBe('walk-01-edited');
    });

    it('round trip through export is stable', async () => {
        const session = await startSession();
        session.setSlider('legs_spread', 2.4);
        await session.applyToClip();
        const once = session.exportEditedClip()!;
        const twice = exportClipJson({
            ...session.state.lastClipEdit!,
            frames: importClipJson(once).frames,
        });
        expect(twice).toBe(once);
    });

    it('rejects malformed files', () => {
        expect(() => importClipJson('{"nope": true}')).toThrow();
    });
});

describe('unit conversion', () => {
    it('degrees are display-only', () => {
        expect(radToDeg(Math.PI)).toBeCloseTo(180, 12);
    });
});

describe('error handling', () => {
    it('unknown clip surfaces an error message', async () => {
        const session = new EditorSession(new ApiClient('', mockServer([])));
        await session.start();
        await session.selectClip('missing');
        expect(session.state.error).toContain('no route');
        expect(session.state.clip).toBeNull();
    });
});

describe('playback', () => {
    it('tick advances and wraps only while playing', async () => {
        const session = await startSession();
        expect(session.tickPlayback()).toBe(0); // paused: no advance
        expect(session.togglePlayback()).toBe(true);
        expect(session.tickPlayback()).toBe(1);
        for (let i = 0; i < FRAMES - 2; i++) session.tickPlayback();
        expect(session.tickPlayback()).toBe(0); // wrapped
        expect(session.togglePlayback()).toBe(false);
    });
});

describe('metric chart', () => {
    it('chart series are exactly the server-reported values', async () => {
        const session = await startSession();
        const series = session.metricChartSeries();
        expect(Object.keys(series).sort()).toEqual(['legs_spread', 'spine_flexion']);
        expect(series['legs_spread']).toEqual(legsSeries);
        expect(series['spine_flexion']).toEqual(spineSeries);
    });
});

describe('seed helpers', () => {
    it('sliderSeeds skips metrics without server values', () => {
        const seeds = sliderSeeds(
            {
                id: 'x',
                frame_rate: 30,
                J,
                parents: [-1, 0, 1],
                frames: clipFrames,
                metrics: { legs_spread: legsSeries },
            },
            ['legs_spread', 'spine_flexion'],
            0
        );
        expect(Object.keys(seeds)).toEqual(['legs_spread']);
    });
});
